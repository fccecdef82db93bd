//! Zero-modified Poisson (ZMP) and negative binomial (ZMNB) observation laws.
//!
//! Given the intensity λ, a zero-modified count satisfies
//! `P(Y = 0) = ω + (1-ω) P0(λ)` and `P(Y = k) = (1-ω) f(k; λ)` for `k > 0`,
//! where `f` is the baseline pmf. ω > 0 inflates zeros, ω < 0 deflates them,
//! and the law is proper as long as `-P0/(1-P0) <= ω <= 1`.
//!
//! The negative binomial baseline has mean λ and variance `λ(1 + a λ^c)`; the
//! index `c` selects the NB1 (`c = 0`) or NB2 (`c = 1`) form.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::intensity::{IntensityFamily, IntensityPath, IntensitySpec};

/// Slack allowed when comparing ω with its lower bound, so that a value set
/// exactly at the bound is not rejected because of rounding.
const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountFamily {
    Zmp,
    Zmnb,
}

/// The parameter vector shared by every model in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub omega: f64,
    pub rho: f64,
    pub beta: f64,
    pub p: f64,
    /// NB dispersion; zero for ZMP.
    #[serde(default)]
    pub a: f64,
    /// NB form index, 0 or 1. Configured, never estimated.
    #[serde(default)]
    pub c: u8,
}

impl Params {
    pub fn zmp(omega: f64, rho: f64, beta: f64, p: f64) -> Self {
        Self {
            omega,
            rho,
            beta,
            p,
            a: 0.0,
            c: 0,
        }
    }

    pub fn zmnb(omega: f64, rho: f64, beta: f64, p: f64, a: f64, c: u8) -> Self {
        Self {
            omega,
            rho,
            beta,
            p,
            a,
            c,
        }
    }

    /// Builds parameters from the intensity mean and variance instead of
    /// the gamma rate and shape.
    pub fn from_moments(omega: f64, rho: f64, mu: f64, sigma2: f64, a: f64, c: u8) -> Self {
        Self {
            omega,
            rho,
            beta: mu / sigma2,
            p: mu * mu / sigma2,
            a,
            c,
        }
    }

    /// `μ_λ = p/β`.
    pub fn mu(&self) -> f64 {
        self.p / self.beta
    }

    /// `σ²_λ = p/β²`.
    pub fn sigma2(&self) -> f64 {
        self.p / (self.beta * self.beta)
    }

    pub fn intensity(&self, family: IntensityFamily) -> IntensitySpec {
        IntensitySpec {
            family,
            rho: self.rho,
            beta: self.beta,
            shape: self.p,
        }
    }
}

/// Full generative description: observation law, intensity law and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: CountFamily,
    pub intensity: IntensityFamily,
    pub params: Params,
}

impl ModelSpec {
    pub fn new(family: CountFamily, intensity: IntensityFamily, params: Params) -> Result<Self> {
        let spec = Self {
            family,
            intensity,
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.intensity_spec().validate()?;
        let p = &self.params;
        if p.c > 1 {
            return Err(Error::InvalidSpec(format!("c must be 0 or 1, got {}", p.c)));
        }
        match self.family {
            CountFamily::Zmp if p.a != 0.0 => {
                return Err(Error::InvalidSpec(format!(
                    "ZMP requires a = 0, got {}",
                    p.a
                )))
            }
            CountFamily::Zmnb if !(p.a > 0.0 && p.a.is_finite()) => {
                return Err(Error::InvalidSpec(format!(
                    "ZMNB requires a > 0, got {} (use ZMP for a = 0)",
                    p.a
                )))
            }
            _ => {}
        }
        if !(p.omega <= 1.0 && p.omega.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "omega must not exceed 1, got {}",
                p.omega
            )));
        }
        Ok(())
    }

    pub fn intensity_spec(&self) -> IntensitySpec {
        self.params.intensity(self.intensity)
    }

    pub fn with_params(&self, params: Params) -> Self {
        Self { params, ..*self }
    }
}

/// An ordered series of non-negative counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSeries {
    pub counts: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<Vec<String>>,
}

impl CountSeries {
    pub fn new(counts: Vec<u64>) -> Self {
        Self {
            counts,
            timestamps: None,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&y| y as f64).collect()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "intensity must be positive and finite, got {lambda}"
        )))
    }
}

fn check_dispersion(family: CountFamily, a: f64) -> Result<()> {
    if family == CountFamily::Zmnb && !(a > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "ZMNB requires a > 0, got {a} (use ZMP for a = 0)"
        )));
    }
    Ok(())
}

/// NB size `r = λ^{1-c}/a` and `ln(1 + a λ^c)`.
fn nb_terms(lambda: f64, a: f64, c: u8) -> (f64, f64) {
    let (r, s) = if c == 0 {
        (lambda / a, a)
    } else {
        (1.0 / a, a * lambda)
    };
    (r, s.ln_1p())
}

/// Baseline (unmodified) probability of a zero count.
pub fn baseline_zero_prob(family: CountFamily, lambda: f64, a: f64, c: u8) -> Result<f64> {
    check_lambda(lambda)?;
    check_dispersion(family, a)?;
    Ok(zero_prob(family, lambda, a, c))
}

fn zero_prob(family: CountFamily, lambda: f64, a: f64, c: u8) -> f64 {
    match family {
        CountFamily::Zmp => (-lambda).exp(),
        CountFamily::Zmnb => {
            let (r, log_s) = nb_terms(lambda, a, c);
            (-r * log_s).exp()
        }
    }
}

/// `[-P0/(1-P0), 1]`, the range of ω that keeps the law proper at this λ.
pub fn feasible_omega_interval(
    family: CountFamily,
    lambda: f64,
    a: f64,
    c: u8,
) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    check_dispersion(family, a)?;
    Ok((omega_lower(family, lambda, a, c), 1.0))
}

pub(crate) fn omega_lower(family: CountFamily, lambda: f64, a: f64, c: u8) -> f64 {
    let p0 = zero_prob(family, lambda, a, c);
    // -P0/(1-P0) with 1-P0 computed without cancellation for small λ.
    let one_minus = match family {
        CountFamily::Zmp => -(-lambda).exp_m1(),
        CountFamily::Zmnb => {
            let (r, log_s) = nb_terms(lambda, a, c);
            -(-r * log_s).exp_m1()
        }
    };
    -p0 / one_minus
}

/// Fails with [`Error::InfeasibleOmega`] unless ω is admissible at λ.
pub fn check_omega(
    family: CountFamily,
    lambda: f64,
    params: &Params,
    index: Option<usize>,
) -> Result<()> {
    let omega = params.omega;
    if omega > 1.0 {
        return Err(Error::InfeasibleOmega {
            omega,
            lambda,
            limit: 1.0,
            bound: "upper",
            index,
        });
    }
    let lower = omega_lower(family, lambda, params.a, params.c);
    if omega < lower - FEASIBILITY_SLACK {
        return Err(Error::InfeasibleOmega {
            omega,
            lambda,
            limit: lower,
            bound: "lower",
            index,
        });
    }
    Ok(())
}

/// Log of the baseline pmf at `k > 0`.
fn ln_baseline_pmf(family: CountFamily, k: u64, lambda: f64, a: f64, c: u8) -> f64 {
    let kf = k as f64;
    match family {
        CountFamily::Zmp => kf * lambda.ln() - lambda - ln_gamma(kf + 1.0),
        CountFamily::Zmnb => {
            let (r, log_s) = nb_terms(lambda, a, c);
            let s = if c == 0 { a } else { a * lambda };
            // ln Γ(k+r) - ln Γ(r) loses all precision for huge r (a → 0), so
            // sum the logs of the rising factorial directly when k is modest.
            let rising = if k <= 1000 {
                (0..k).map(|j| (r + j as f64).ln()).sum::<f64>()
            } else {
                ln_gamma(kf + r) - ln_gamma(r)
            };
            rising - ln_gamma(kf + 1.0) - r * log_s + kf * (s.ln() - log_s)
        }
    }
}

/// Zero-modified pmf at `k`.
pub fn zm_pmf(family: CountFamily, k: u64, lambda: f64, params: &Params) -> Result<f64> {
    check_lambda(lambda)?;
    check_dispersion(family, params.a)?;
    check_omega(family, lambda, params, None)?;
    let w = params.omega;
    Ok(if k == 0 {
        w + (1.0 - w) * zero_prob(family, lambda, params.a, params.c)
    } else {
        (1.0 - w) * ln_baseline_pmf(family, k, lambda, params.a, params.c).exp()
    })
}

fn baseline_sample<R: Rng + ?Sized>(
    family: CountFamily,
    lambda: f64,
    a: f64,
    c: u8,
    rng: &mut R,
) -> u64 {
    let mean = match family {
        CountFamily::Zmp => lambda,
        CountFamily::Zmnb => {
            // Gamma-Poisson mixture: Gamma(shape r, scale a λ^c) has mean λ.
            let (r, _) = nb_terms(lambda, a, c);
            let scale = if c == 0 { a } else { a * lambda };
            Gamma::new(r, scale)
                .expect("positive gamma parameters")
                .sample(rng)
        }
    };
    if mean > 0.0 {
        Poisson::new(mean)
            .expect("positive Poisson mean")
            .sample(rng) as u64
    } else {
        0
    }
}

/// Inverse-CDF draw from the modified pmf, used when ω < 0.
fn inverse_cdf_sample<R: Rng + ?Sized>(
    family: CountFamily,
    lambda: f64,
    params: &Params,
    rng: &mut R,
) -> u64 {
    let (w, a, c) = (params.omega, params.a, params.c);
    let u: f64 = rng.random();
    let mut base = zero_prob(family, lambda, a, c);
    let mut cum = w + (1.0 - w) * base;
    let (r, _) = if family == CountFamily::Zmnb {
        nb_terms(lambda, a, c)
    } else {
        (0.0, 0.0)
    };
    let q = if family == CountFamily::Zmnb {
        let s = if c == 0 { a } else { a * lambda };
        s / (1.0 + s)
    } else {
        0.0
    };
    let sd = (lambda * (1.0 + a * lambda.powi(c as i32))).sqrt();
    let k_max = (lambda + 50.0 * sd + 1000.0) as u64;
    let mut k = 0;
    while cum < u && k < k_max {
        base *= match family {
            CountFamily::Zmp => lambda / (k + 1) as f64,
            CountFamily::Zmnb => (k as f64 + r) / (k + 1) as f64 * q,
        };
        k += 1;
        cum += (1.0 - w) * base;
    }
    k
}

/// Draws `Y_t | λ_t` independently along the path.
pub fn zm_sample<R: Rng + ?Sized>(
    family: CountFamily,
    lambda_path: &IntensityPath,
    params: &Params,
    rng: &mut R,
) -> Result<CountSeries> {
    check_dispersion(family, params.a)?;
    let mut counts = Vec::with_capacity(lambda_path.len());
    for (t, &lambda) in lambda_path.values().iter().enumerate() {
        check_lambda(lambda)?;
        check_omega(family, lambda, params, Some(t))?;
        let y = if params.omega >= 0.0 {
            if rng.random::<f64>() < params.omega {
                0
            } else {
                baseline_sample(family, lambda, params.a, params.c, rng)
            }
        } else {
            inverse_cdf_sample(family, lambda, params, rng)
        };
        counts.push(y);
    }
    Ok(CountSeries::new(counts))
}

/// `a λ^c` for ZMNB, zero for ZMP.
fn extra_dispersion(family: CountFamily, lambda: f64, params: &Params) -> f64 {
    match family {
        CountFamily::Zmp => 0.0,
        CountFamily::Zmnb => params.a * lambda.powi(params.c as i32),
    }
}

/// Conditional mean `(1-ω)λ` and variance `(1-ω)(1 + ωλ + aλ^c)λ`.
pub fn conditional_moments(family: CountFamily, lambda: f64, params: &Params) -> (f64, f64) {
    let w = params.omega;
    let extra = extra_dispersion(family, lambda, params);
    (
        (1.0 - w) * lambda,
        (1.0 - w) * (1.0 + w * lambda + extra) * lambda,
    )
}

/// Fourth central moment `E[(Y - (1-ω)λ)^4 | λ]` of the ZMNB law; `a = 0`
/// gives the ZMP value.
pub fn zmnb_fourth_central_moment(lambda: f64, params: &Params) -> f64 {
    let (w, a, l) = (params.omega, params.a, lambda);
    let (w2, w3, a2, a3) = (w * w, w * w * w, a * a, a * a * a);
    let bracket = if params.c == 0 {
        6.0 * a3
            + 12.0 * a2
            + 7.0 * a
            + l.powi(3) * (3.0 * w3 - 3.0 * w2 + w)
            + l * l * (6.0 * a * w2 + 6.0 * w2)
            + l * (8.0 * a2 * w + 3.0 * a2 + 12.0 * a * w + 6.0 * a + 4.0 * w + 3.0)
            + 1.0
    } else {
        l.powi(3) * (6.0 * a3 + 8.0 * a2 * w + 3.0 * a2 + 6.0 * a * w2 + 3.0 * w3 - 3.0 * w2 + w)
            + l * l * (12.0 * a2 + 12.0 * a * w + 6.0 * a + 6.0 * w2)
            + l * (7.0 * a + 4.0 * w + 3.0)
            + 1.0
    };
    (1.0 - w) * l * bracket
}

/// Conditional variance of the squared innovation `(Y - (1-ω)λ)^2`, i.e. the
/// fourth central moment minus the squared variance.
pub fn quadratic_innovation_variance(family: CountFamily, lambda: f64, params: &Params) -> f64 {
    let p = match family {
        CountFamily::Zmp => Params { a: 0.0, ..*params },
        CountFamily::Zmnb => *params,
    };
    let (_, var) = conditional_moments(family, lambda, &p);
    zmnb_fourth_central_moment(lambda, &p) - var * var
}

/// Bracket `B` with `Var(Y) = (1-ω) B`, so that `ρ_y(k) = (1-ω)σ²ρ^k / B`.
fn marginal_bracket(spec: &ModelSpec) -> f64 {
    let p = &spec.params;
    let (mu, s2, w, a) = (p.mu(), p.sigma2(), p.omega, p.a);
    match (spec.family, p.c) {
        (CountFamily::Zmp, _) => mu + s2 + w * mu * mu,
        (CountFamily::Zmnb, 0) => (1.0 + a) * mu + s2 + w * mu * mu,
        (CountFamily::Zmnb, _) => mu + (a + 1.0) * s2 + (w + a) * mu * mu,
    }
}

/// Unconditional mean and variance of the counts.
pub fn marginal_count_moments(spec: &ModelSpec) -> (f64, f64) {
    let w = spec.params.omega;
    (
        (1.0 - w) * spec.params.mu(),
        (1.0 - w) * marginal_bracket(spec),
    )
}

/// Lag-`k` autocorrelation of the counts.
pub fn count_acf(spec: &ModelSpec, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let p = &spec.params;
    (1.0 - p.omega) * p.sigma2() * p.rho.powi(k as i32) / marginal_bracket(spec)
}
