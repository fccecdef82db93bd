//! Model-adequacy checks: Pearson residuals, autocorrelation tests and
//! fitted-versus-empirical marginal probabilities.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::observation::{conditional_moments, zm_pmf, CountFamily, CountSeries, ModelSpec};
use crate::stats::{durbin_levinson, sample_acf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub values: Vec<f64>,
}

/// `e_t = (y_t - (1-ω)λ̂_t) / sqrt(Var(Y_t | λ̂_t))` on filtered intensities.
pub fn pearson_residuals(
    series: &CountSeries,
    filtered: &[f64],
    spec: &ModelSpec,
) -> Result<ResidualSeries> {
    if filtered.len() != series.len() {
        return Err(Error::InvalidInput(
            "filtered path and series differ in length".into(),
        ));
    }
    let mut values = Vec::with_capacity(series.len());
    for (t, (&y, &lam)) in series.counts.iter().zip(filtered).enumerate() {
        if !(lam > 0.0) {
            return Err(Error::InvalidInput(format!(
                "filtered intensity {lam} at t={t} is not positive"
            )));
        }
        let (mean, var) = conditional_moments(spec.family, lam, &spec.params);
        if !(var > 0.0) {
            return Err(Error::ZeroVariance { index: t });
        }
        values.push((y as f64 - mean) / var.sqrt());
    }
    Ok(ResidualSeries { values })
}

/// `λ̂_t - ρλ̂_{t-1} - (1-ρ)μ_λ` for `t >= 2`: how far the filtered path departs
/// from the intensity's own one-step prediction.
pub fn intensity_prediction_residuals(filtered: &[f64], rho: f64, mu: f64) -> Vec<f64> {
    filtered
        .windows(2)
        .map(|w| w[1] - rho * w[0] - (1.0 - rho) * mu)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LjungBox {
    pub statistic: f64,
    pub p_value: f64,
    pub lags: usize,
}

fn check_length(x: &[f64], max_lag: usize) -> Result<()> {
    if x.len() <= max_lag {
        return Err(Error::InvalidInput(format!(
            "series of length {} is too short for lag {max_lag}",
            x.len()
        )));
    }
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return Err(Error::ConstantSeries);
    }
    Ok(())
}

/// `Q = n(n+2) Σ_{k=1}^{h} r_k² / (n-k)` against χ² with `h` degrees of freedom.
pub fn ljung_box(x: &[f64], max_lag: usize) -> Result<LjungBox> {
    if max_lag == 0 {
        return Err(Error::InvalidInput(
            "Ljung-Box needs at least one lag".into(),
        ));
    }
    check_length(x, max_lag)?;
    let n = x.len() as f64;
    let acf = sample_acf(x, max_lag);
    let statistic = n
        * (n + 2.0)
        * (1..=max_lag)
            .map(|k| acf[k] * acf[k] / (n - k as f64))
            .sum::<f64>();
    let chi = ChiSquared::new(max_lag as f64).expect("positive degrees of freedom");
    Ok(LjungBox {
        statistic,
        p_value: chi.sf(statistic),
        lags: max_lag,
    })
}

/// Sample ACF (lags `0..=max_lag`) and PACF (lags `1..=max_lag`).
pub fn sample_acf_pacf(x: &[f64], max_lag: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_length(x, max_lag)?;
    let acf = sample_acf(x, max_lag);
    let pacf = durbin_levinson(&acf, max_lag);
    Ok((acf, pacf))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedProbs {
    pub probs: Vec<f64>,
    /// `1 - Σ probs`, the fitted mass beyond `kmax`.
    pub tail_mass: f64,
    /// Per-cell Monte-Carlo standard error; `None` for the closed form.
    pub mc_se: Option<Vec<f64>>,
}

/// Number of intensity draws used when no closed form is available.
pub const DEFAULT_MC_DRAWS: usize = 1_000_000;

/// Marginal `P(Y = k)` for `k = 0..=kmax`.
///
/// ZMP with a gamma (or exponential) intensity has the closed form
/// `ω 1{k=0} + (1-ω) β^p Γ(p+k) / (k! (β+1)^{p+k} Γ(p))`. ZMNB is marginalized
/// over `mc_draws` draws of the stationary intensity.
pub fn fitted_marginal_probs<R: Rng + ?Sized>(
    spec: &ModelSpec,
    kmax: u64,
    mc_draws: usize,
    rng: &mut R,
) -> Result<FittedProbs> {
    spec.validate()?;
    let p = &spec.params;
    match spec.family {
        CountFamily::Zmp => {
            let probs: Vec<f64> = (0..=kmax)
                .map(|k| {
                    let kf = k as f64;
                    let ln = p.p * p.beta.ln() - (p.p + kf) * (p.beta + 1.0).ln()
                        + ln_gamma(p.p + kf)
                        - ln_gamma(p.p)
                        - ln_gamma(kf + 1.0);
                    let base = (1.0 - p.omega) * ln.exp();
                    if k == 0 {
                        p.omega + base
                    } else {
                        base
                    }
                })
                .collect();
            let tail_mass = 1.0 - probs.iter().sum::<f64>();
            Ok(FittedProbs {
                probs,
                tail_mass,
                mc_se: None,
            })
        }
        CountFamily::Zmnb => {
            if mc_draws < 2 {
                return Err(Error::InvalidInput(
                    "Monte-Carlo marginalization needs at least two draws".into(),
                ));
            }
            let (probs, mc_se) = monte_carlo_marginal(spec, kmax, mc_draws, rng)?;
            let tail_mass = 1.0 - probs.iter().sum::<f64>();
            Ok(FittedProbs {
                probs,
                tail_mass,
                mc_se: Some(mc_se),
            })
        }
    }
}

/// Averages the conditional pmf over `draws` stationary intensity draws;
/// returns the cell means and their standard errors.
fn monte_carlo_marginal<R: Rng + ?Sized>(
    spec: &ModelSpec,
    kmax: u64,
    draws: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = &spec.params;
    let gamma = Gamma::new(p.p, 1.0 / p.beta).expect("validated gamma parameters");
    let cells = kmax as usize + 1;
    let (mut sum, mut sum_sq) = (vec![0.0; cells], vec![0.0; cells]);
    for _ in 0..draws {
        let lambda: f64 = gamma.sample(rng).max(f64::MIN_POSITIVE);
        for k in 0..cells {
            let v = zm_pmf(spec.family, k as u64, lambda, p)?;
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let n = draws as f64;
    let probs: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let se = probs
        .iter()
        .zip(&sum_sq)
        .map(|(m, s2)| ((s2 / n - m * m).max(0.0) / (n - 1.0)).sqrt())
        .collect();
    Ok((probs, se))
}

/// Monte-Carlo marginalization for any model, used to cross-check the
/// closed form.
pub fn monte_carlo_marginal_probs<R: Rng + ?Sized>(
    spec: &ModelSpec,
    kmax: u64,
    draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if draws < 2 {
        return Err(Error::InvalidInput(
            "Monte-Carlo marginalization needs at least two draws".into(),
        ));
    }
    monte_carlo_marginal(spec, kmax, draws, rng).map(|(probs, _)| probs)
}

/// Relative frequencies of `0..=kmax`.
pub fn empirical_probs(series: &CountSeries, kmax: u64) -> Vec<f64> {
    let mut counts = vec![0usize; kmax as usize + 1];
    for &y in &series.counts {
        if y <= kmax {
            counts[y as usize] += 1;
        }
    }
    let n = series.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbTable {
    pub support: Vec<u64>,
    pub fitted: Vec<f64>,
    pub empirical: Vec<f64>,
    pub fitted_tail_mass: f64,
    pub fitted_mc_se: Option<Vec<f64>>,
}

pub fn prob_table<R: Rng + ?Sized>(
    spec: &ModelSpec,
    series: &CountSeries,
    kmax: u64,
    mc_draws: usize,
    rng: &mut R,
) -> Result<ProbTable> {
    let fitted = fitted_marginal_probs(spec, kmax, mc_draws, rng)?;
    Ok(ProbTable {
        support: (0..=kmax).collect(),
        fitted: fitted.probs,
        empirical: empirical_probs(series, kmax),
        fitted_tail_mass: fitted.tail_mass,
        fitted_mc_se: fitted.mc_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::IntensityFamily;
    use crate::observation::Params;
    use crate::rng::seeded;
    use approx::assert_relative_eq;
    use rand_distr::StandardNormal;

    #[test]
    fn residual_examples() {
        let spec = ModelSpec::new(
            CountFamily::Zmp,
            IntensityFamily::Gar1,
            Params::zmp(0.0, 0.5, 1.0, 4.0),
        )
        .unwrap();
        let r = pearson_residuals(&CountSeries::new(vec![6, 4]), &[4.0, 4.0], &spec).unwrap();
        assert_relative_eq!(r.values[0], 1.0);
        assert_eq!(r.values[1], 0.0);

        let zi = ModelSpec::new(
            CountFamily::Zmp,
            IntensityFamily::Gar1,
            Params::zmp(0.5, 0.5, 1.0, 4.0),
        )
        .unwrap();
        let r = pearson_residuals(&CountSeries::new(vec![1]), &[2.0], &zi).unwrap();
        assert_eq!(r.values[0], 0.0);

        let degenerate = ModelSpec::new(
            CountFamily::Zmp,
            IntensityFamily::Gar1,
            Params::zmp(1.0, 0.5, 1.0, 4.0),
        )
        .unwrap();
        assert!(matches!(
            pearson_residuals(&CountSeries::new(vec![0]), &[2.0], &degenerate),
            Err(Error::ZeroVariance { index: 0 })
        ));
    }

    #[test]
    fn ljung_box_on_alternating_series() {
        let x: Vec<f64> = (0..200)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let lb = ljung_box(&x, 5).unwrap();
        assert!(lb.p_value < 1e-10);
        assert!(matches!(
            ljung_box(&[2.0; 50], 5),
            Err(Error::ConstantSeries)
        ));
        assert!(ljung_box(&[1.0, 2.0], 5).is_err());
    }

    #[test]
    fn ljung_box_statistic_by_hand() {
        let x = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
        let acf = sample_acf(&x, 2);
        let n = 6.0;
        let q = n * (n + 2.0) * (acf[1] * acf[1] / 5.0 + acf[2] * acf[2] / 4.0);
        let lb = ljung_box(&x, 2).unwrap();
        assert_relative_eq!(lb.statistic, q);
        assert_relative_eq!(lb.p_value, (-q / 2.0).exp(), max_relative = 1e-12);
    }

    #[test]
    fn white_noise_stays_in_bands() {
        let mut rng = seeded(4);
        let x: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
        let (acf, pacf) = sample_acf_pacf(&x, 20).unwrap();
        assert_eq!(acf[0], 1.0);
        let band = 2.0 / (5000f64).sqrt();
        let inside = acf[1..].iter().filter(|r| r.abs() < band).count();
        assert!(inside >= 17);
        assert_eq!(pacf.len(), 20);
    }

    #[test]
    fn geometric_zero_cell() {
        let spec = ModelSpec::new(
            CountFamily::Zmp,
            IntensityFamily::Gar1,
            Params::zmp(0.0, 0.5, 1.5, 1.0),
        )
        .unwrap();
        let probs = fitted_marginal_probs(&spec, 30, 0, &mut seeded(1)).unwrap();
        assert_relative_eq!(probs.probs[0], 1.5 / 2.5, epsilon = 1e-14);
        assert!(probs.tail_mass >= -1e-12 && probs.tail_mass < 1e-5);
    }

    #[test]
    fn closed_form_matches_monte_carlo() {
        let spec = ModelSpec::new(
            CountFamily::Zmp,
            IntensityFamily::Gar1,
            Params::zmp(0.2723, 0.7492, 2.1275, 9.9184),
        )
        .unwrap();
        let closed = fitted_marginal_probs(&spec, 12, 0, &mut seeded(1))
            .unwrap()
            .probs;
        let mc = monte_carlo_marginal_probs(&spec, 12, 200_000, &mut seeded(2)).unwrap();
        for (a, b) in closed.iter().zip(&mc) {
            assert!((a - b).abs() < 0.003, "{a} vs {b}");
        }
    }

    #[test]
    fn nb_marginal_is_normalized() {
        let spec = ModelSpec::new(
            CountFamily::Zmnb,
            IntensityFamily::Gar1,
            Params::zmnb(0.3, 0.8, 2.0, 1.0, 0.5, 1),
        )
        .unwrap();
        let fitted = fitted_marginal_probs(&spec, 60, 20_000, &mut seeded(3)).unwrap();
        assert!(fitted.tail_mass.abs() < 1e-6);
        assert!(fitted.mc_se.unwrap().iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn empirical_frequencies() {
        let zeros = CountSeries::new(vec![0; 10]);
        assert_eq!(empirical_probs(&zeros, 3)[0], 1.0);
        let series = CountSeries::new(vec![0, 1, 1, 3, 2, 0, 5]);
        let probs = empirical_probs(&series, 5);
        assert_relative_eq!(probs.iter().sum::<f64>(), 1.0);
        assert_relative_eq!(probs[1], 2.0 / 7.0);
    }

    #[test]
    fn prediction_residuals_vanish_on_ar1_path() {
        let mut path = vec![3.0];
        for _ in 0..10 {
            let l = *path.last().unwrap();
            path.push(0.6 * l + 0.4 * 2.0);
        }
        assert!(intensity_prediction_residuals(&path, 0.6, 2.0)
            .iter()
            .all(|e| e.abs() < 1e-12));
    }
}
