//! Subcommands of the `zmcount` binary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use zmcount::config::{Command, RunConfig};
use zmcount::diagnostics::{ljung_box, pearson_residuals, prob_table, sample_acf_pacf, LjungBox};
use zmcount::estimation::{bootstrap_se, fit, FitResult};
use zmcount::experiment::{reproduce, write_experiment_csv};
use zmcount::filter::gkf_filter;
use zmcount::intensity::{simulate_intensity, IntensityFamily};
use zmcount::io::{self, Metadata, PlotPoint};
use zmcount::observation::{zm_sample, CountFamily, CountSeries, ModelSpec, Params};
use zmcount::rng::seeded;

#[derive(Debug, Parser)]
#[command(
    name = "zmcount",
    version,
    about = "Zero-modified count time series: simulate, filter, fit, diagnose"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Simulate a count series (and its latent intensity) from model.params.
    Simulate(Common),
    /// Estimate parameters from a count file.
    Fit(Common),
    /// Run the generalized Kalman filter at given parameters.
    Filter(Common),
    /// Residuals, ACF/PACF, Ljung–Box tests and fitted-vs-empirical probabilities.
    Diagnose(Common),
    /// Monte-Carlo tables from the config's experiment block.
    Reproduce(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for replicate-level parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Count CSV file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Count column, by header name or zero-based index.
    #[arg(long)]
    pub column: Option<String>,
    /// Fit JSON written by `fit`, supplying the parameters.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Series length for `simulate`.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_parser = parse_family)]
    pub family: Option<CountFamily>,
    #[arg(long, value_parser = parse_intensity)]
    pub intensity: Option<IntensityFamily>,
    /// NB form index (0 or 1).
    #[arg(long)]
    pub c: Option<u8>,
}

fn parse_family(s: &str) -> std::result::Result<CountFamily, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase()))
        .map_err(|_| format!("unknown family {s:?} (zmp or zmnb)"))
}

fn parse_intensity(s: &str) -> std::result::Result<IntensityFamily, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase()))
        .map_err(|_| format!("unknown intensity {s:?} (gar1 or ear1)"))
}

/// Failure classes that map to distinct exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    /// Unreadable input or invalid configuration.
    Usage,
    /// The model or its starting values are infeasible.
    Infeasible,
    NotConverged,
}

impl Failure {
    pub fn exit_code(self) -> i32 {
        match self {
            Failure::Usage => 2,
            Failure::Infeasible => 3,
            Failure::NotConverged => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Failure::Usage => "invalid input or configuration",
            Failure::Infeasible => "infeasible model",
            Failure::NotConverged => "estimation did not converge",
        })
    }
}

impl std::error::Error for Failure {}

/// Exit code for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.exit_code();
        }
        if let Some(e) = cause.downcast_ref::<zmcount::Error>() {
            use zmcount::Error as E;
            return match e {
                E::InfeasibleOmega { .. }
                | E::InfeasibleInit(_)
                | E::EmptyGrid
                | E::DegenerateWeight { .. }
                | E::ZeroVariance { .. }
                | E::NoSignChange { .. }
                | E::ConstantSeries => Failure::Infeasible,
                E::TooManyFailures { .. } => Failure::NotConverged,
                E::InvalidSpec(_) | E::InvalidInput(_) | E::Io(_) | E::Csv(_) | E::Json(_) => {
                    Failure::Usage
                }
            }
            .exit_code();
        }
    }
    Failure::Usage.exit_code()
}

/// Config file merged with command-line overrides.
fn resolve(command: Command, args: &Common) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => {
            RunConfig::load(path).with_context(|| format!("reading config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    if args.jobs.is_some() {
        config.jobs = args.jobs;
    }
    if let Some(out) = &args.out {
        config.out = out.clone();
    }
    if args.input.is_some() {
        config.input = args.input.clone();
    }
    if args.column.is_some() {
        config.column = args.column.clone();
    }
    if args.fit.is_some() {
        config.fit_result = args.fit.clone();
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(f) = args.family {
        config.model.family = f;
    }
    if let Some(i) = args.intensity {
        config.model.intensity = i;
    }
    if let Some(c) = args.c {
        config.model.c = c;
    }
    // A supplied fit fixes the model form.
    if let Some(path) = &config.fit_result {
        let fitted = read_fit(path)?;
        config.model.family = fitted.form.family;
        config.model.intensity = fitted.form.intensity;
        config.model.c = fitted.form.c;
        config.model.params = Some(fitted.params_hat);
    }
    config.validate_for(command)?;
    Ok(config)
}

fn read_fit(path: &Path) -> Result<FitResult> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading fit {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(zmcount::Error::from)
        .with_context(|| format!("parsing fit {}", path.display()))
}

fn read_input(config: &RunConfig) -> Result<CountSeries> {
    let path = config.input.as_ref().expect("validated");
    io::read_counts(path, config.column.as_deref())
        .with_context(|| format!("reading counts {}", path.display()))
}

fn out_dir(config: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&config.out)
        .map_err(zmcount::Error::from)
        .with_context(|| format!("creating {}", config.out.display()))?;
    Ok(&config.out)
}

fn write_metadata(config: &RunConfig, command: Command) -> Result<()> {
    let meta = Metadata::new(command.name(), config.seed, config)?;
    io::write_json_file(&config.out.join("metadata.json"), &meta)?;
    Ok(())
}

fn write_csv(path: PathBuf, f: impl FnOnce(&mut fs::File) -> zmcount::Result<()>) -> Result<()> {
    let mut file = fs::File::create(&path)
        .map_err(zmcount::Error::from)
        .with_context(|| format!("creating {}", path.display()))?;
    f(&mut file).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| anyhow!("cannot start worker pool: {e}"))?;
    Ok(pool.install(f))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Simulate(a) => cmd_simulate(&resolve(Command::Simulate, &a)?),
        Cmd::Fit(a) => cmd_fit(&resolve(Command::Fit, &a)?),
        Cmd::Filter(a) => cmd_filter(&resolve(Command::Filter, &a)?),
        Cmd::Diagnose(a) => cmd_diagnose(&resolve(Command::Diagnose, &a)?),
        Cmd::Reproduce(a) => cmd_reproduce(&resolve(Command::Reproduce, &a)?),
    }
}

fn cmd_simulate(config: &RunConfig) -> Result<()> {
    let spec = config.model.spec()?;
    let mut rng = seeded(config.seed.expect("validated"));
    let lambda = simulate_intensity(&spec.intensity_spec(), config.n, &mut rng)?;
    let series = zm_sample(spec.family, &lambda, &spec.params, &mut rng)?;
    let dir = out_dir(config)?;
    write_csv(dir.join("counts.csv"), |f| {
        io::write_counts(f, &series, None)
    })?;
    if config.write_intensity {
        write_csv(dir.join("intensity.csv"), |f| {
            io::write_counts(f, &series, Some(&lambda))
        })?;
    }
    write_metadata(config, Command::Simulate)?;
    let zeros = series.counts.iter().filter(|&&y| y == 0).count();
    println!(
        "wrote {} counts to {} (zero fraction {:.4})",
        series.len(),
        dir.display(),
        zeros as f64 / series.len() as f64
    );
    Ok(())
}

fn cmd_fit(config: &RunConfig) -> Result<()> {
    let series = read_input(config)?;
    let form = config.model.form();
    let mut result = fit(&series, &form, &config.fit)?;
    if config.bootstrap_reps > 0 && result.converged {
        let spec = result.spec();
        let mut rng = seeded(config.seed.expect("validated"));
        let summary = with_pool(config.jobs, || {
            bootstrap_se(
                &spec,
                series.len(),
                config.bootstrap_reps,
                &config.fit,
                &mut rng,
            )
        })??;
        eprintln!(
            "bootstrap: {} refits, {} failed",
            summary.completed, summary.failed
        );
        result.se = Some(summary.se);
    }
    let dir = out_dir(config)?;
    io::write_json_file(&dir.join("fit.json"), &result)?;
    let path = gkf_filter(&series, &result.spec());
    match path {
        Ok(path) => write_csv(dir.join("filtered.csv"), |f| {
            io::write_filtered(f, &series, &path)
        })?,
        Err(e) => eprintln!("warning: filtered path not written: {e}"),
    }
    write_csv(dir.join("residuals.csv"), |f| {
        io::write_residuals(f, &series, &result.residuals)
    })?;
    write_metadata(config, Command::Fit)?;
    print_fit(&result);
    if !result.converged {
        return Err(anyhow::Error::new(Failure::NotConverged).context(format!(
            "no root after {} iterations (EF norm {:.3e})",
            result.iterations, result.ef_norm
        )));
    }
    Ok(())
}

fn print_fit(r: &FitResult) {
    let p = &r.params_hat;
    let se = r.se.as_ref();
    let line = |name: &str, v: f64, s: Option<f64>| match s {
        Some(s) => println!("  {name:<6} {v:>12.6}   se {s:.6}"),
        None => println!("  {name:<6} {v:>12.6}"),
    };
    println!(
        "{} / {} fit: converged={} iterations={} start={} ({} tried)",
        format!("{:?}", r.form.family).to_lowercase(),
        format!("{:?}", r.form.intensity).to_lowercase(),
        r.converged,
        r.iterations,
        r.init_method,
        r.starts
    );
    line("rho", p.rho, se.map(|s| s.rho));
    line("omega", p.omega, se.map(|s| s.omega));
    line("beta", p.beta, se.map(|s| s.beta));
    line("p", p.p, se.map(|s| s.p));
    if r.form.family == CountFamily::Zmnb {
        line("a", p.a, se.and_then(|s| s.a));
    }
    if p.omega < 0.0 {
        println!("  omega < 0: zero deflation relative to the baseline law");
    }
    if !r.boundary.is_empty() {
        println!("  on a bound: {}", r.boundary.join(", "));
    }
}

fn model_spec(config: &RunConfig) -> Result<ModelSpec> {
    config
        .model
        .spec()
        .map_err(|e| anyhow::Error::new(e).context("parameters come from --fit or model.params"))
}

fn cmd_filter(config: &RunConfig) -> Result<()> {
    let series = read_input(config)?;
    let spec = model_spec(config)?;
    let path = gkf_filter(&series, &spec)?;
    let dir = out_dir(config)?;
    write_csv(dir.join("filtered.csv"), |f| {
        io::write_filtered(f, &series, &path)
    })?;
    write_metadata(config, Command::Filter)?;
    println!(
        "filtered {} steps ({} clamped) into {}",
        path.len(),
        path.clamped_count(),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct LjungBoxReport {
    counts_lag1: LjungBox,
    counts: LjungBox,
    residuals: LjungBox,
    squared_residuals: LjungBox,
}

fn cmd_diagnose(config: &RunConfig) -> Result<()> {
    let series = read_input(config)?;
    let spec = model_spec(config)?;
    let lags = config.diagnostics.max_lag;
    let path = gkf_filter(&series, &spec)?;
    let residuals = pearson_residuals(&series, &path.lambda(), &spec)?.values;
    let y = series.as_f64();
    let squared: Vec<f64> = residuals.iter().map(|r| r * r).collect();
    let report = LjungBoxReport {
        counts_lag1: ljung_box(&y, 1)?,
        counts: ljung_box(&y, lags)?,
        residuals: ljung_box(&residuals, lags)?,
        squared_residuals: ljung_box(&squared, lags)?,
    };
    let (acf_y, pacf_y) = sample_acf_pacf(&y, lags)?;
    let (acf_r, pacf_r) = sample_acf_pacf(&residuals, lags)?;
    let mut rng = seeded(config.seed.unwrap_or(0));
    let table = prob_table(
        &spec,
        &series,
        config.diagnostics.kmax,
        config.diagnostics.mc_draws,
        &mut rng,
    )?;

    let dir = out_dir(config)?;
    write_csv(dir.join("residuals.csv"), |f| {
        io::write_residuals(f, &series, &residuals)
    })?;
    write_csv(dir.join("acf_pacf.csv"), |f| {
        io::write_acf_pacf(
            f,
            &[("counts", &acf_y, &pacf_y), ("residuals", &acf_r, &pacf_r)],
        )
    })?;
    write_csv(dir.join("prob_table.csv"), |f| {
        io::write_prob_table(f, &table)
    })?;
    io::write_json_file(&dir.join("ljung_box.json"), &report)?;

    let mut points = Vec::new();
    for (t, &v) in y.iter().enumerate() {
        points.push(PlotPoint::new("counts", (t + 1) as f64, v));
    }
    for (t, &v) in path.lambda().iter().enumerate() {
        points.push(PlotPoint::new("lambda_filtered", (t + 1) as f64, v));
    }
    for (t, &v) in residuals.iter().enumerate() {
        points.push(PlotPoint::new("residuals", (t + 1) as f64, v));
    }
    for (name, values) in [
        ("acf_counts", &acf_y),
        ("pacf_counts", &pacf_y),
        ("acf_residuals", &acf_r),
        ("pacf_residuals", &pacf_r),
    ] {
        for (k, &v) in values.iter().enumerate() {
            points.push(PlotPoint::new(name, (k + 1) as f64, v));
        }
    }
    for (i, &k) in table.support.iter().enumerate() {
        points.push(PlotPoint::new("prob_fitted", k as f64, table.fitted[i]));
        points.push(PlotPoint::new(
            "prob_empirical",
            k as f64,
            table.empirical[i],
        ));
    }
    write_csv(dir.join("plot_long.csv"), |f| {
        io::write_plot_long(f, &points)
    })?;
    write_metadata(config, Command::Diagnose)?;

    println!(
        "Ljung-Box counts lag 1: Q={:.4} p={:.4}",
        report.counts_lag1.statistic, report.counts_lag1.p_value
    );
    println!(
        "Ljung-Box residuals lag {lags}: Q={:.4} p={:.4}",
        report.residuals.statistic, report.residuals.p_value
    );
    println!(
        "P(Y=0): fitted {:.4} empirical {:.4}",
        table.fitted[0], table.empirical[0]
    );
    Ok(())
}

fn cmd_reproduce(config: &RunConfig) -> Result<()> {
    let exp = config.experiment.as_ref().expect("validated");
    let template = ModelSpec {
        family: config.model.family,
        intensity: config.model.intensity,
        params: Params {
            c: config.model.c,
            ..exp.rows[0]
        },
    };
    let seed = config.seed.expect("validated");
    let rows = with_pool(config.jobs, || {
        reproduce(
            &template,
            &exp.rows,
            exp.n,
            exp.replicates,
            seed,
            exp.start,
            &config.fit,
        )
    })??;
    let dir = out_dir(config)?;
    write_csv(dir.join("experiment.csv"), |f| {
        write_experiment_csv(f, &rows)
    })?;
    write_metadata(config, Command::Reproduce)?;
    for r in &rows {
        let fmt = |v: Option<Vec<f64>>| {
            v.map(|v| {
                v.iter()
                    .map(|x| format!("{x:.4}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or("-".into())
        };
        println!(
            "true [{}] mean [{}] mse [{}] completed {}/{}",
            fmt(Some(r.truth.to_vec())),
            fmt(r.mean.map(|m| m.to_vec())),
            fmt(r.mse.map(|m| m.to_vec())),
            r.completed,
            r.requested
        );
    }
    if rows.iter().all(|r| r.completed == 0) {
        return Err(
            anyhow::Error::new(Failure::NotConverged).context("every replicate was discarded")
        );
    }
    Ok(())
}
