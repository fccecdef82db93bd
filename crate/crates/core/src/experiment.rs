//! Monte-Carlo replication: simulate, refit, summarize.
//!
//! Replicate `i` of row `r` draws from its own stream keyed by `(r, i)`, so
//! results do not depend on how the replicates are scheduled.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentStart;
use crate::diagnostics::{ljung_box, pearson_residuals};
use crate::error::{Error, Result};
use crate::estimation::{fit, simulate_series, FitOptions, InitStrategy, ModelForm};
use crate::io::fmt_g17;
use crate::observation::{CountFamily, ModelSpec, Params};
use crate::rng::derived;

/// Lag used for the residual whiteness check recorded per replicate.
pub const WHITENESS_LAG: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// The generating ω is inadmissible at a realized intensity.
    Simulation,
    /// No admissible starting point could be found.
    InfeasibleInit,
    NotConverged,
    /// Any other estimation error.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFit {
    pub params: Params,
    pub boundary: bool,
    pub iterations: usize,
    /// Ljung–Box p-value of the Pearson residuals at [`WHITENESS_LAG`].
    pub residual_lb_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub index: usize,
    pub outcome: std::result::Result<ReplicateFit, DiscardReason>,
}

/// Stream key for replicate `index` of table row `row`.
pub fn replicate_key(row: usize, index: usize) -> u64 {
    ((row as u64) << 32) | index as u64
}

/// Simulates and refits one replicate.
pub fn run_replicate(
    truth: &ModelSpec,
    n: usize,
    seed: u64,
    key: u64,
    start: ExperimentStart,
    options: &FitOptions,
) -> std::result::Result<ReplicateFit, DiscardReason> {
    let series = simulate_series(truth, n, &mut derived(seed, key))
        .map_err(|_| DiscardReason::Simulation)?;
    let options = match start {
        ExperimentStart::Truth => FitOptions {
            init: InitStrategy::Fixed {
                params: truth.params,
            },
            ..*options
        },
        ExperimentStart::Data => *options,
    };
    let result = fit(&series, &ModelForm::of(truth), &options).map_err(|e| match e {
        Error::InfeasibleInit(_) | Error::EmptyGrid => DiscardReason::InfeasibleInit,
        _ => DiscardReason::Failed,
    })?;
    if !result.converged {
        return Err(DiscardReason::NotConverged);
    }
    let spec = result.spec();
    let residual_lb_p = pearson_residuals(&series, &result.filtered, &spec)
        .ok()
        .and_then(|r| ljung_box(&r.values, WHITENESS_LAG).ok())
        .map(|lb| lb.p_value);
    Ok(ReplicateFit {
        params: result.params_hat,
        boundary: !result.boundary.is_empty(),
        iterations: result.iterations,
        residual_lb_p,
    })
}

/// Runs `replicates` replicates of one row in parallel, ordered by index.
pub fn run_row(
    truth: &ModelSpec,
    row: usize,
    n: usize,
    replicates: usize,
    seed: u64,
    start: ExperimentStart,
    options: &FitOptions,
) -> Vec<Replicate> {
    (0..replicates)
        .into_par_iter()
        .map(|index| Replicate {
            index,
            outcome: run_replicate(truth, n, seed, replicate_key(row, index), start, options),
        })
        .collect()
}

/// Per-parameter values in table order `(ρ, ω, β, p[, a])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamValues {
    pub rho: f64,
    pub omega: f64,
    pub beta: f64,
    pub p: f64,
    pub a: Option<f64>,
}

impl ParamValues {
    fn of(params: &Params, family: CountFamily) -> Self {
        Self {
            rho: params.rho,
            omega: params.omega,
            beta: params.beta,
            p: params.p,
            a: (family == CountFamily::Zmnb).then_some(params.a),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.rho, self.omega, self.beta, self.p];
        v.extend(self.a);
        v
    }
}

/// One row of a Monte-Carlo table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub family: CountFamily,
    pub n: usize,
    pub truth: ParamValues,
    /// `None` when no replicate completed.
    pub mean: Option<ParamValues>,
    pub mse: Option<ParamValues>,
    pub requested: usize,
    pub completed: usize,
    pub discarded_simulation: usize,
    pub discarded_infeasible_init: usize,
    pub discarded_not_converged: usize,
    pub discarded_failed: usize,
    /// Completed fits with a parameter on a projection bound.
    pub boundary: usize,
    /// Share of completed fits with ω̂ < 0.
    pub negative_omega_share: f64,
    /// Share of completed fits whose residuals pass Ljung–Box at 5%.
    pub white_residual_share: f64,
}

impl ExperimentRow {
    pub fn discarded(&self) -> usize {
        self.discarded_simulation
            + self.discarded_infeasible_init
            + self.discarded_not_converged
            + self.discarded_failed
    }
}

/// Means and mean squared errors over completed replicates, accumulated in
/// replicate-index order whatever order `replicates` is given in.
pub fn summarize(truth: &ModelSpec, n: usize, replicates: &[Replicate]) -> ExperimentRow {
    let family = truth.family;
    let mut ordered: Vec<&Replicate> = replicates.iter().collect();
    ordered.sort_by_key(|r| r.index);
    let done: Vec<&ReplicateFit> = ordered
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .collect();
    let count = |reason: DiscardReason| {
        replicates
            .iter()
            .filter(|r| r.outcome.as_ref().err() == Some(&reason))
            .count()
    };
    let truth_values = ParamValues::of(&truth.params, family);
    let k = done.len() as f64;
    let column_stats = |f: &dyn Fn(&Params) -> f64, t: f64| {
        let mean = done.iter().map(|r| f(&r.params)).sum::<f64>() / k;
        let mse = done.iter().map(|r| (f(&r.params) - t).powi(2)).sum::<f64>() / k;
        (mean, mse)
    };
    let (mean, mse) = if done.is_empty() {
        (None, None)
    } else {
        let (rho, omega, beta, p) = (
            column_stats(&|q| q.rho, truth.params.rho),
            column_stats(&|q| q.omega, truth.params.omega),
            column_stats(&|q| q.beta, truth.params.beta),
            column_stats(&|q| q.p, truth.params.p),
        );
        let a = (family == CountFamily::Zmnb).then(|| column_stats(&|q| q.a, truth.params.a));
        (
            Some(ParamValues {
                rho: rho.0,
                omega: omega.0,
                beta: beta.0,
                p: p.0,
                a: a.map(|x| x.0),
            }),
            Some(ParamValues {
                rho: rho.1,
                omega: omega.1,
                beta: beta.1,
                p: p.1,
                a: a.map(|x| x.1),
            }),
        )
    };
    let share = |pred: &dyn Fn(&ReplicateFit) -> bool| {
        if done.is_empty() {
            0.0
        } else {
            done.iter().filter(|r| pred(r)).count() as f64 / k
        }
    };
    ExperimentRow {
        family,
        n,
        truth: truth_values,
        mean,
        mse,
        requested: replicates.len(),
        completed: done.len(),
        discarded_simulation: count(DiscardReason::Simulation),
        discarded_infeasible_init: count(DiscardReason::InfeasibleInit),
        discarded_not_converged: count(DiscardReason::NotConverged),
        discarded_failed: count(DiscardReason::Failed),
        boundary: done.iter().filter(|r| r.boundary).count(),
        negative_omega_share: share(&|r| r.params.omega < 0.0),
        white_residual_share: share(&|r| r.residual_lb_p.is_some_and(|p| p > 0.05)),
    }
}

/// Runs and summarizes every row. Rows are processed in order; replicates
/// within a row run in parallel on the current rayon pool.
pub fn reproduce(
    template: &ModelSpec,
    rows: &[Params],
    n: usize,
    replicates: usize,
    seed: u64,
    start: ExperimentStart,
    options: &FitOptions,
) -> Result<Vec<ExperimentRow>> {
    rows.iter()
        .enumerate()
        .map(|(r, params)| {
            let truth = ModelSpec::new(
                template.family,
                template.intensity,
                Params {
                    c: template.params.c,
                    ..*params
                },
            )?;
            let reps = run_row(&truth, r, n, replicates, seed, start, options);
            Ok(summarize(&truth, n, &reps))
        })
        .collect()
}

const PARAM_NAMES: [&str; 5] = ["rho", "omega", "beta", "p", "a"];

/// Writes rows as CSV: truths, means and MSEs per parameter, then counts.
pub fn write_experiment_csv<W: Write>(out: W, rows: &[ExperimentRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let width = if rows.iter().any(|r| r.truth.a.is_some()) {
        5
    } else {
        4
    };
    let mut header = vec!["family".to_string(), "n".to_string()];
    for prefix in ["true", "mean", "mse"] {
        header.extend(PARAM_NAMES[..width].iter().map(|p| format!("{prefix}_{p}")));
    }
    header.extend(
        [
            "requested",
            "completed",
            "discarded_simulation",
            "discarded_infeasible_init",
            "discarded_not_converged",
            "discarded_failed",
            "boundary",
            "negative_omega_share",
            "white_residual_share",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    let cells = |v: Option<&ParamValues>| -> Vec<String> {
        let values = v.map(|v| v.to_vec()).unwrap_or_default();
        (0..width)
            .map(|i| values.get(i).map(|x| fmt_g17(*x)).unwrap_or_default())
            .collect()
    };
    for r in rows {
        let mut rec = vec![format!("{:?}", r.family).to_lowercase(), r.n.to_string()];
        rec.extend(cells(Some(&r.truth)));
        rec.extend(cells(r.mean.as_ref()));
        rec.extend(cells(r.mse.as_ref()));
        rec.extend(
            [
                r.requested,
                r.completed,
                r.discarded_simulation,
                r.discarded_infeasible_init,
                r.discarded_not_converged,
                r.discarded_failed,
                r.boundary,
            ]
            .map(|x| x.to_string()),
        );
        rec.push(fmt_g17(r.negative_omega_share));
        rec.push(fmt_g17(r.white_residual_share));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
