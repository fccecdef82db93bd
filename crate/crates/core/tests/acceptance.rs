//! Acceptance checks, one PASS/FAIL line per criterion with its tolerances.
//!
//! Runs 200 Monte-Carlo replicates per table row by default; pass `--full`
//! (`cargo test --test acceptance -- --full`) or set `ZMCOUNT_FULL=1` for
//! 1000. Real-data checks look for `syphilis.csv` and `assaults.csv` in
//! `$ZMCOUNT_DATA_DIR` (default `tests/data`) and are skipped when absent.

use std::path::PathBuf;
use std::process::ExitCode;

use zmcount::config::ExperimentStart;
use zmcount::diagnostics::{empirical_probs, fitted_marginal_probs, ljung_box};
use zmcount::estimation::{
    fit, moment_init_ear1, moment_init_gar1_factorial, simulate_series, FitOptions, ModelForm,
    SampleMoments,
};
use zmcount::experiment::{run_row, summarize, ExperimentRow, Replicate};
use zmcount::filter::gkf_filter;
use zmcount::intensity::IntensityFamily;
use zmcount::io::read_counts;
use zmcount::observation::{
    conditional_moments, zm_pmf, zmnb_fourth_central_moment, CountFamily, CountSeries, ModelSpec,
    Params,
};
use zmcount::rng::{derived, seeded};

const SEED: u64 = 20_240_601;

#[derive(Default)]
struct Report {
    failed: Vec<String>,
    skipped: Vec<String>,
}

/// One sub-check: a measured value against a target with its tolerance.
struct Check {
    label: String,
    pass: bool,
}

fn within(label: &str, value: f64, target: f64, tol: f64) -> Check {
    Check {
        label: format!("{label} = {value:.4} (target {target} ± {tol})"),
        pass: (value - target).abs() <= tol,
    }
}

fn ratio_within(label: &str, value: f64, target: f64, factor: f64) -> Check {
    let pass = value <= target * factor && value >= target / factor;
    Check {
        label: format!("{label} = {value:.5} (target {target}, within factor {factor})"),
        pass,
    }
}

fn at_least(label: &str, value: f64, floor: f64) -> Check {
    Check {
        label: format!("{label} = {value:.4} (need ≥ {floor})"),
        pass: value >= floor,
    }
}

fn at_most(label: &str, value: f64, ceiling: f64) -> Check {
    Check {
        label: format!("{label} = {value:.3e} (need ≤ {ceiling:.0e})"),
        pass: value <= ceiling,
    }
}

fn fact(label: String, pass: bool) -> Check {
    Check { label, pass }
}

impl Report {
    fn criterion(&mut self, id: &str, title: &str, checks: Vec<Check>) {
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        println!(
            "{} criterion {id}: {title}",
            if pass { "PASS" } else { "FAIL" }
        );
        for c in &checks {
            println!("       [{}] {}", if c.pass { "ok" } else { "x " }, c.label);
        }
        if !pass {
            self.failed.push(id.to_string());
        }
    }

    fn skip(&mut self, id: &str, title: &str, why: &str) {
        println!("SKIP criterion {id}: {title} ({why})");
        self.skipped.push(id.to_string());
    }
}

fn table_row(spec: &ModelSpec, row: usize, replicates: usize) -> (ExperimentRow, Vec<Replicate>) {
    let reps = run_row(
        spec,
        row,
        1000,
        replicates,
        SEED,
        ExperimentStart::Data,
        &FitOptions::default(),
    );
    (summarize(spec, 1000, &reps), reps)
}

fn counts_line(row: &ExperimentRow) -> Check {
    fact(
        format!(
            "replicates: {} completed of {} (simulation {}, infeasible start {}, not converged {}, other {})",
            row.completed,
            row.requested,
            row.discarded_simulation,
            row.discarded_infeasible_init,
            row.discarded_not_converged,
            row.discarded_failed
        ),
        row.completed > 0,
    )
}

fn criterion_1_and_7(report: &mut Report, replicates: usize) {
    let spec = ModelSpec::new(
        CountFamily::Zmp,
        IntensityFamily::Gar1,
        Params::zmp(0.2, 0.8, 2.0, 4.0),
    )
    .unwrap();
    let (row, reps) = table_row(&spec, 0, replicates);
    let mut checks = vec![counts_line(&row)];
    if let (Some(mean), Some(mse)) = (row.mean, row.mse) {
        checks.extend([
            within("mean rho", mean.rho, 0.7972, 0.02),
            within("mean omega", mean.omega, 0.2009, 0.02),
            within("mean beta", mean.beta, 2.0293, 0.15),
            within("mean p", mean.p, 4.0342, 0.35),
            ratio_within("mse rho", mse.rho, 0.0002, 2.0),
            ratio_within("mse omega", mse.omega, 0.0004, 2.0),
            ratio_within("mse beta", mse.beta, 0.0326, 2.0),
            ratio_within("mse p", mse.p, 0.1331, 2.0),
        ]);
    }
    report.criterion(
        "1",
        &format!("ZMP-GAR1 (0.8, 0.2, 2, 4), n=1000, {replicates} replicates"),
        checks,
    );

    let pvalues: Vec<f64> = reps
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .filter_map(|f| f.residual_lb_p)
        .collect();
    let share = pvalues.iter().filter(|&&p| p > 0.05).count() as f64 / pvalues.len().max(1) as f64;
    report.criterion(
        "7",
        "Ljung-Box(20) on Pearson residuals of well-specified fits",
        vec![
            fact(
                format!("{} fits with residual tests", pvalues.len()),
                pvalues.len() >= replicates * 9 / 10,
            ),
            at_least("share with p > 0.05", share, 0.85),
        ],
    );
}

fn criterion_2(report: &mut Report, replicates: usize) {
    let spec = ModelSpec::new(
        CountFamily::Zmp,
        IntensityFamily::Gar1,
        Params::zmp(-0.2, 0.8, 0.5, 4.0),
    )
    .unwrap();
    let (row, _) = table_row(&spec, 1, replicates);
    let mut checks = vec![counts_line(&row)];
    match row.mean {
        Some(mean) => checks.extend([
            at_least("share of omega-hat < 0", row.negative_omega_share, 0.95),
            within("mean rho", mean.rho, 0.7971, 0.02),
            within("mean omega", mean.omega, -0.2013, 0.02),
            within("mean beta", mean.beta, 0.5019, 0.15),
            within("mean p", mean.p, 4.1444, 0.35),
        ]),
        None => checks.push(fact(
            "no estimates: omega = -0.2 is below -P0/(1-P0) at the simulated intensities (mean intensity 8)".into(),
            false,
        )),
    }
    report.criterion(
        "2",
        &format!("ZMP-GAR1 deflation (0.8, -0.2, 0.5, 4), n=1000, {replicates} replicates"),
        checks,
    );
}

fn criterion_3(report: &mut Report, replicates: usize) {
    let spec = ModelSpec::new(
        CountFamily::Zmnb,
        IntensityFamily::Gar1,
        Params::zmnb(0.3, 0.8, 2.0, 1.0, 0.5, 1),
    )
    .unwrap();
    let (row, _) = table_row(&spec, 2, replicates);
    let mut checks = vec![counts_line(&row)];
    if let Some(mean) = row.mean {
        checks.extend([
            within("mean rho", mean.rho, 0.7812, 0.05),
            within("mean omega", mean.omega, 0.3041, 0.05),
            within("mean beta", mean.beta, 2.0097, 0.10),
            within("mean p", mean.p, 1.0754, 0.25),
            within("mean a", mean.a.unwrap_or(f64::NAN), 0.463, 0.25),
        ]);
    }
    report.criterion(
        "3",
        &format!("ZMNB-GAR1 c=1 (0.8, 0.3, 2, 1, 0.5), n=1000, {replicates} replicates"),
        checks,
    );
}

/// Moments of a pmf by direct summation over `0..=kmax`.
fn brute_moments(pmf: impl Fn(u64) -> f64, kmax: u64) -> (f64, f64, f64, f64) {
    let probs: Vec<f64> = (0..=kmax).map(pmf).collect();
    let total: f64 = probs.iter().sum();
    let mean: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let central = |r: i32| {
        probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - mean).powi(r) * p)
            .sum::<f64>()
    };
    (total, mean, central(2), central(4))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn criterion_4(report: &mut Report) {
    let (mut worst_norm, mut worst_mean, mut worst_var, mut worst_m4, mut cells) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0);
    for &lambda in &[0.5, 2.0, 6.0] {
        for &omega in &[-0.005, 0.2, 0.7] {
            for &a in &[0.5, 1.5] {
                for c in [0u8, 1] {
                    let params = Params::zmnb(omega, 0.5, 1.0, 1.0, a, c);
                    let (total, mean, var, m4) = brute_moments(
                        |k| zm_pmf(CountFamily::Zmnb, k, lambda, &params).unwrap(),
                        4000,
                    );
                    let (m, v) = conditional_moments(CountFamily::Zmnb, lambda, &params);
                    worst_norm = worst_norm.max((total - 1.0).abs());
                    worst_mean = worst_mean.max(rel(m, mean));
                    worst_var = worst_var.max(rel(v, var));
                    worst_m4 = worst_m4.max(rel(zmnb_fourth_central_moment(lambda, &params), m4));
                    cells += 1;
                }
            }
        }
    }
    // ZMP on the same (λ, ω) grid.
    for &lambda in &[0.5, 2.0, 6.0] {
        for &omega in &[-0.001, 0.2, 0.7] {
            let params = Params::zmp(omega, 0.5, 1.0, 1.0);
            let (total, mean, var, _) = brute_moments(
                |k| zm_pmf(CountFamily::Zmp, k, lambda, &params).unwrap(),
                200,
            );
            let (m, v) = conditional_moments(CountFamily::Zmp, lambda, &params);
            worst_norm = worst_norm.max((total - 1.0).abs());
            worst_mean = worst_mean.max(rel(m, mean));
            worst_var = worst_var.max(rel(v, var));
        }
    }
    let mut worst_limit = 0.0f64;
    for &lambda in &[0.5, 2.0, 6.0] {
        for c in [0u8, 1] {
            let nb = Params::zmnb(0.2, 0.5, 1.0, 1.0, 1e-8, c);
            let poisson = Params::zmp(0.2, 0.5, 1.0, 1.0);
            for k in 0..40 {
                let a = zm_pmf(CountFamily::Zmnb, k, lambda, &nb).unwrap();
                let b = zm_pmf(CountFamily::Zmp, k, lambda, &poisson).unwrap();
                worst_limit = worst_limit.max((a - b).abs());
            }
        }
    }
    report.criterion(
        "4",
        &format!("pmf and moment oracles on {cells} ZMNB cells plus ZMP"),
        vec![
            at_most("max |sum pmf - 1|", worst_norm, 1e-10),
            at_most("max rel error, conditional mean", worst_mean, 1e-8),
            at_most("max rel error, conditional variance", worst_var, 1e-8),
            at_most("max rel error, fourth central moment", worst_m4, 1e-8),
            at_most("max |ZMNB(a=1e-8) - ZMP| pmf", worst_limit, 1e-6),
        ],
    );
}

fn criterion_5(report: &mut Report) {
    let spec = ModelSpec::new(
        CountFamily::Zmp,
        IntensityFamily::Gar1,
        Params::zmp(0.2, 0.8, 2.0, 4.0),
    )
    .unwrap();

    // Innovation moments at the truth.
    let series = simulate_series(&spec, 10_000, &mut seeded(SEED)).unwrap();
    let path = gkf_filter(&series, &spec).unwrap();
    let n = path.steps.len() as f64;
    let h_mean = path.steps.iter().map(|s| s.innovation).sum::<f64>() / n;
    let h2 = path
        .steps
        .iter()
        .map(|s| s.innovation * s.innovation)
        .sum::<f64>()
        / n;
    let j = path.steps.iter().map(|s| s.innovation_var).sum::<f64>() / n;
    let h_sd = (h2 - h_mean * h_mean).sqrt();

    // Filtering against the unconditional mean on 20 series with known intensity.
    let mut wins = 0;
    for i in 0..20 {
        let mut rng = derived(SEED, 100 + i);
        let lambda =
            zmcount::intensity::simulate_intensity(&spec.intensity_spec(), 500, &mut rng).unwrap();
        let ys =
            zmcount::observation::zm_sample(spec.family, &lambda, &spec.params, &mut rng).unwrap();
        let filtered = gkf_filter(&ys, &spec).unwrap().lambda();
        let mse_filter: f64 = filtered
            .iter()
            .zip(lambda.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let mse_mean: f64 = lambda
            .values()
            .iter()
            .map(|b| (spec.params.mu() - b).powi(2))
            .sum();
        if mse_filter < mse_mean {
            wins += 1;
        }
    }

    // Five steps evaluated in exact rational arithmetic.
    let golden = gkf_filter(&CountSeries::new(vec![3, 0, 5, 2, 0]), &spec).unwrap();
    let expected_lambda = [
        2.153284671532847,
        1.8424654062547519,
        2.542986672474137,
        2.44504252831827,
        1.9634980265583202,
    ];
    let expected_var = [
        0.3284671532846715,
        0.4949566627806782,
        0.5733062012721245,
        0.608886765362974,
        0.6247829917594104,
    ];
    let mut worst = 0.0f64;
    for (s, (l, v)) in golden
        .states
        .iter()
        .zip(expected_lambda.iter().zip(&expected_var))
    {
        worst = worst
            .max(rel(s.lambda_filtered, *l))
            .max(rel(s.error_var, *v));
    }

    report.criterion(
        "5",
        "generalized Kalman filter properties",
        vec![
            at_most("|mean innovation| / sd", (h_mean / h_sd).abs(), 0.1),
            within("mean h^2 / mean J", h2 / j, 1.0, 0.1),
            fact(
                format!("filter beats the unconditional mean on {wins}/20 series"),
                wins == 20,
            ),
            at_most(
                "golden 5-step trace, max rel error",
                worst,
                4.0 * f64::EPSILON,
            ),
        ],
    );
}

fn criterion_6(report: &mut Report) {
    let mut worst = 0.0f64;
    for params in [
        Params::zmp(0.2, 0.8, 2.0, 4.0),
        Params::zmp(-0.05, 0.5, 3.0, 2.0),
        Params::zmp(0.6, 0.3, 0.5, 1.5),
    ] {
        let spec = ModelSpec::new(CountFamily::Zmp, IntensityFamily::Gar1, params).unwrap();
        let got = moment_init_gar1_factorial(&SampleMoments::population(&spec)).unwrap();
        for (a, b) in [
            (got.omega, params.omega),
            (got.rho, params.rho),
            (got.beta, params.beta),
            (got.p, params.p),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    for params in [
        Params::zmp(0.3, 0.5, 0.5, 1.0),
        Params::zmp(0.1, 0.9, 2.0, 1.0),
    ] {
        let spec = ModelSpec::new(CountFamily::Zmp, IntensityFamily::Ear1, params).unwrap();
        let got = moment_init_ear1(&SampleMoments::population(&spec)).unwrap();
        for (a, b) in [
            (got.omega, params.omega),
            (got.rho, params.rho),
            (got.beta, params.beta),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    report.criterion(
        "6",
        "moment initializers invert population moments",
        vec![at_most(
            "max |recovered - true| over 5 models",
            worst,
            1e-12,
        )],
    );
}

fn data_dir() -> PathBuf {
    std::env::var_os("ZMCOUNT_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data"))
}

fn criterion_8(report: &mut Report) {
    let title = "real-data fits (syphilis, assaults)";
    let (syphilis, assaults) = (
        data_dir().join("syphilis.csv"),
        data_dir().join("assaults.csv"),
    );
    if !syphilis.exists() || !assaults.exists() {
        let why = format!("needs {} and {}", syphilis.display(), assaults.display());
        report.skip("8", title, &why);
        return;
    }
    let form = ModelForm::new(CountFamily::Zmp, IntensityFamily::Gar1, 0);
    let mut checks = Vec::new();
    match read_counts(&syphilis, None)
        .and_then(|s| fit(&s, &form, &FitOptions::default()).map(|f| (s, f)))
    {
        Ok((series, f)) => {
            let p = f.params_hat;
            let fitted = fitted_marginal_probs(&f.spec(), 0, 0, &mut seeded(SEED)).unwrap();
            let raw = ljung_box(&series.as_f64(), 1).unwrap();
            checks.extend([
                within("syphilis rho", p.rho, 0.7492, 0.02),
                within("syphilis omega", p.omega, 0.2723, 0.02),
                within("syphilis p", p.p, 9.9184, 0.3),
                within("syphilis beta", p.beta, 2.1275, 0.3),
                within("syphilis fitted P(0)", fitted.probs[0], 0.2882, 0.01),
                within(
                    "syphilis empirical P(0)",
                    empirical_probs(&series, 0)[0],
                    0.2823,
                    5e-5,
                ),
                within("syphilis raw Ljung-Box lag-1 p", raw.p_value, 0.041, 0.01),
            ]);
        }
        Err(e) => checks.push(fact(format!("syphilis fit failed: {e}"), false)),
    }
    match read_counts(&assaults, None).and_then(|s| fit(&s, &form, &FitOptions::default())) {
        Ok(f) => {
            let p = f.params_hat;
            checks.extend([
                within("assaults omega", p.omega, -0.1161, 0.05),
                within("assaults rho", p.rho, 0.4311, 0.05),
                within("assaults p", p.p, 1.8314, 0.05),
                within("assaults beta", p.beta, 2.2575, 0.05),
            ]);
        }
        Err(e) => checks.push(fact(format!("assaults fit failed: {e}"), false)),
    }
    report.criterion("8", title, checks);
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    // Under `cargo test` with a filter, only run when the filter names this target.
    if let Some(filter) = args.iter().skip(1).find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return ExitCode::SUCCESS;
        }
    }
    let full =
        args.iter().any(|a| a == "--full") || std::env::var("ZMCOUNT_FULL").is_ok_and(|v| v == "1");
    let replicates = if full { 1000 } else { 200 };

    let mut report = Report::default();
    criterion_1_and_7(&mut report, replicates);
    criterion_2(&mut report, replicates);
    criterion_3(&mut report, replicates);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criterion_6(&mut report);
    criterion_8(&mut report);

    println!(
        "acceptance: {} failed [{}], {} skipped [{}]",
        report.failed.len(),
        report.failed.join(", "),
        report.skipped.len(),
        report.skipped.join(", ")
    );
    if report.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
