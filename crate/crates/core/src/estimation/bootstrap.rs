//! Parametric bootstrap standard errors.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intensity::simulate_intensity;
use crate::observation::{zm_sample, CountFamily, CountSeries, ModelSpec};
use crate::rng::{derived, RandomSource};

use super::ef::ModelForm;
use super::solver::{fit, FitOptions, FitResult, InitStrategy};

/// Standard errors laid out like [`crate::observation::Params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsSe {
    pub omega: f64,
    pub rho: f64,
    pub beta: f64,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub se: ParamsSe,
    pub completed: usize,
    pub failed: usize,
}

/// Simulates a series of length `n` from `spec`.
pub fn simulate_series(spec: &ModelSpec, n: usize, rng: &mut RandomSource) -> Result<CountSeries> {
    let lambda = simulate_intensity(&spec.intensity_spec(), n, rng)?;
    zm_sample(spec.family, &lambda, &spec.params, rng)
}

fn refit(
    spec: &ModelSpec,
    n: usize,
    seed: u64,
    index: u64,
    options: &FitOptions,
) -> Option<FitResult> {
    let series = simulate_series(spec, n, &mut derived(seed, index)).ok()?;
    let fitted = fit(&series, &ModelForm::of(spec), options).ok()?;
    (fitted.converged && fitted.boundary.is_empty()).then_some(fitted)
}

fn sd(values: &[f64]) -> f64 {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)).sqrt()
}

/// Bootstrap from explicit replicate keys: replicate `i` simulates with
/// stream `keys[i]` under `seed`. Repeating a key repeats the replicate.
pub fn bootstrap_se_from_keys(
    spec_hat: &ModelSpec,
    n: usize,
    seed: u64,
    keys: &[u64],
    options: &FitOptions,
) -> Result<BootstrapSummary> {
    if keys.len() < 2 {
        return Err(Error::InvalidInput(
            "bootstrap needs at least two replicates".into(),
        ));
    }
    // Refits start from the bootstrap truth, which is what generated the data.
    let options = FitOptions {
        init: InitStrategy::Fixed {
            params: spec_hat.params,
        },
        ..*options
    };
    let fits: Vec<Option<FitResult>> = keys
        .par_iter()
        .map(|&k| refit(spec_hat, n, seed, k, &options))
        .collect();
    let done: Vec<&FitResult> = fits.iter().flatten().collect();
    let failed = keys.len() - done.len();
    if done.len() < 2 || 2 * failed > keys.len() {
        return Err(Error::TooManyFailures {
            failed,
            total: keys.len(),
        });
    }
    let column = |f: fn(&FitResult) -> f64| sd(&done.iter().map(|r| f(r)).collect::<Vec<_>>());
    let se = ParamsSe {
        omega: column(|r| r.params_hat.omega),
        rho: column(|r| r.params_hat.rho),
        beta: column(|r| r.params_hat.beta),
        p: column(|r| r.params_hat.p),
        a: (spec_hat.family == CountFamily::Zmnb).then(|| column(|r| r.params_hat.a)),
    };
    Ok(BootstrapSummary {
        se,
        completed: done.len(),
        failed,
    })
}

/// Standard deviations of refitted estimates over `reps` series simulated
/// from the fitted model. Failed or boundary fits are excluded and counted;
/// more than half failing is an error.
pub fn bootstrap_se<R: Rng + ?Sized>(
    spec_hat: &ModelSpec,
    n: usize,
    reps: usize,
    options: &FitOptions,
    rng: &mut R,
) -> Result<BootstrapSummary> {
    let seed: u64 = rng.random();
    let keys: Vec<u64> = (0..reps as u64).collect();
    bootstrap_se_from_keys(spec_hat, n, seed, &keys, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::IntensityFamily;
    use crate::observation::Params;
    use crate::rng::seeded;

    fn spec() -> ModelSpec {
        ModelSpec::new(
            CountFamily::Zmp,
            IntensityFamily::Gar1,
            Params::zmp(0.2, 0.8, 2.0, 4.0),
        )
        .unwrap()
    }

    #[test]
    fn repeated_replicate_has_zero_spread() {
        let summary =
            bootstrap_se_from_keys(&spec(), 300, 5, &[0, 0], &FitOptions::default()).unwrap();
        assert_eq!(summary.completed, 2);
        assert_eq!(summary.se.rho, 0.0);
        assert_eq!(summary.se.omega, 0.0);
    }

    #[test]
    fn standard_errors_are_positive_and_reproducible() {
        let a = bootstrap_se(&spec(), 400, 8, &FitOptions::default(), &mut seeded(1)).unwrap();
        let b = bootstrap_se(&spec(), 400, 8, &FitOptions::default(), &mut seeded(1)).unwrap();
        assert_eq!(a, b);
        assert!(a.se.rho > 0.0 && a.se.omega > 0.0);
        assert!(a.se.a.is_none());
    }

    #[test]
    fn rejects_single_replicate() {
        assert!(bootstrap_se_from_keys(&spec(), 100, 1, &[0], &FitOptions::default()).is_err());
    }
}
