//! Stationary non-negative AR(1) intensity processes.
//!
//! Both families follow `λ_t = ρ λ_{t-1} + η_t`. The innovation law is chosen
//! so that the marginal is exactly Gamma(rate β, shape p) (GAR(1)) or
//! Exponential(β) (EAR(1), the p = 1 case).

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityFamily {
    Gar1,
    Ear1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensitySpec {
    pub family: IntensityFamily,
    /// AR coefficient, `0 <= rho < 1`.
    pub rho: f64,
    /// Rate of the gamma/exponential marginal.
    pub beta: f64,
    /// Gamma shape; must be 1 for EAR(1).
    pub shape: f64,
}

impl IntensitySpec {
    pub fn gar1(rho: f64, beta: f64, shape: f64) -> Result<Self> {
        let spec = Self {
            family: IntensityFamily::Gar1,
            rho,
            beta,
            shape,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ear1(rho: f64, beta: f64) -> Result<Self> {
        let spec = Self {
            family: IntensityFamily::Ear1,
            rho,
            beta,
            shape: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "shape p must be positive, got {}",
                self.shape
            )));
        }
        if self.family == IntensityFamily::Ear1 && self.shape != 1.0 {
            return Err(Error::InvalidSpec(format!(
                "EAR(1) requires p = 1, got {}",
                self.shape
            )));
        }
        Ok(())
    }

    /// `(μ_λ, σ²_λ) = (p/β, p/β²)`.
    pub fn moments(&self) -> (f64, f64) {
        (self.shape / self.beta, self.shape / (self.beta * self.beta))
    }

    /// `ρ_λ(k) = ρ^k`.
    pub fn acf(&self, lag: usize) -> f64 {
        self.rho.powi(lag as i32)
    }

    fn marginal(&self) -> Gamma<f64> {
        Gamma::new(self.shape, 1.0 / self.beta).expect("validated gamma parameters")
    }
}

/// A simulated intensity path; every value is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityPath(pub Vec<f64>);

impl IntensityPath {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One EAR(1) innovation: zero with probability ρ, otherwise Exp(β).
///
/// Its distribution function is `ρ + (1-ρ)(1 - e^{-βx})` for `x >= 0`.
pub fn ear1_innovation_sample<R: Rng + ?Sized>(spec: &IntensitySpec, rng: &mut R) -> Result<f64> {
    if spec.family != IntensityFamily::Ear1 {
        return Err(Error::InvalidSpec(
            "EAR(1) innovation requested for a non-EAR(1) spec".into(),
        ));
    }
    spec.validate()?;
    Ok(ear1_innovation(spec, rng))
}

fn ear1_innovation<R: Rng + ?Sized>(spec: &IntensitySpec, rng: &mut R) -> f64 {
    if rng.random::<f64>() < spec.rho {
        0.0
    } else {
        Exp::new(spec.beta).expect("validated rate").sample(rng)
    }
}

/// One GAR(1) innovation `Σ_{i=1}^{N} ρ^{U_i} E_i` with `N ~ Poisson(p log(1/ρ))`,
/// `U_i ~ U(0,1)` and `E_i ~ Exp(β)`.
///
/// ρ = 0 is rejected: the Poisson mean diverges. [`simulate_intensity`] serves
/// that case with iid gamma draws.
pub fn gar1_innovation_sample<R: Rng + ?Sized>(spec: &IntensitySpec, rng: &mut R) -> Result<f64> {
    if spec.family != IntensityFamily::Gar1 {
        return Err(Error::InvalidSpec(
            "GAR(1) innovation requested for a non-GAR(1) spec".into(),
        ));
    }
    spec.validate()?;
    if spec.rho == 0.0 {
        return Err(Error::InvalidSpec(
            "GAR(1) innovation is undefined at rho = 0 (iid gamma case)".into(),
        ));
    }
    Ok(gar1_innovation(spec, rng))
}

fn gar1_innovation<R: Rng + ?Sized>(spec: &IntensitySpec, rng: &mut R) -> f64 {
    let mean = spec.shape * (1.0 / spec.rho).ln();
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(rng) as u64
    } else {
        0
    };
    let exp = Exp::new(spec.beta).expect("validated rate");
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            spec.rho.powf(u) * exp.sample(rng)
        })
        .sum()
}

/// Stationary path of length `n`: `λ_0` is drawn from the marginal and the
/// recursion is applied `n` times.
pub fn simulate_intensity<R: Rng + ?Sized>(
    spec: &IntensitySpec,
    n: usize,
    rng: &mut R,
) -> Result<IntensityPath> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("path length must be at least 1".into()));
    }
    let marginal = spec.marginal();
    let mut lambda = marginal.sample(rng);
    let mut path = Vec::with_capacity(n);
    for _ in 0..n {
        lambda = match (spec.family, spec.rho == 0.0) {
            (IntensityFamily::Gar1, true) => marginal.sample(rng),
            (IntensityFamily::Gar1, false) => spec.rho * lambda + gar1_innovation(spec, rng),
            (IntensityFamily::Ear1, _) => spec.rho * lambda + ear1_innovation(spec, rng),
        };
        path.push(lambda);
    }
    Ok(IntensityPath(path))
}

/// `(μ_λ, σ²_λ)` of the stationary marginal.
pub fn intensity_moments(spec: &IntensitySpec) -> (f64, f64) {
    spec.moments()
}

pub fn intensity_acf(spec: &IntensitySpec, lag: usize) -> f64 {
    spec.acf(lag)
}
