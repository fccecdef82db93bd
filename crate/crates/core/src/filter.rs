//! Scalar generalized Kalman filter for the latent intensity.
//!
//! The counts are read as the linear observation equation
//! `Y_t = (1-ω) λ_t + ε_t`, where the state-dependent observation variance is
//! replaced by its expectation `(1-ω) v̄` under the stationary intensity law.
//! With `C` the error variance, one step is
//!
//! ```text
//! λ̂_{t|t-1} = ρ λ̂_{t-1} + (1-ρ) μ_λ       C_{t|t-1} = ρ² C_{t-1} + (1-ρ²) σ²_λ
//! J_t = (1-ω)² C_{t|t-1} + (1-ω) v̄         K_t = (1-ω) C_{t|t-1} / J_t
//! h_t = y_t - (1-ω) λ̂_{t|t-1}
//! λ̂_t = λ̂_{t|t-1} + K_t h_t               C_t = (1 - (1-ω) K_t) C_{t|t-1}
//! ```
//!
//! `J_t` is the conditional variance of the innovation `h_t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::{check_omega, CountFamily, CountSeries, ModelSpec};

/// Floor applied to a non-positive filtered intensity.
pub const DEFAULT_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub lambda_filtered: f64,
    pub error_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterStep {
    pub prediction: f64,
    pub pred_var: f64,
    pub gain: f64,
    pub innovation: f64,
    pub innovation_var: f64,
    /// The update produced `λ̂ <= 0` and was floored.
    pub clamped: bool,
}

impl FilterStep {
    /// `J_t² / ((1-ω) P_t)` with `P_t = (1-ω) C_{t|t-1}`. This expression is
    /// sometimes quoted for the innovation variance, but it equals `J_t / ((1-ω)K_t)`
    /// and overstates the true variance `J_t` by that factor.
    pub fn squared_gain_form(&self, omega: f64) -> f64 {
        let p = (1.0 - omega) * self.pred_var;
        self.innovation_var * self.innovation_var / ((1.0 - omega) * p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterOptions {
    /// `λ_0` used for the first prediction; defaults to `μ_λ`.
    pub lambda0: Option<f64>,
    pub clamp: f64,
    /// Reject ω that is infeasible at the previous filtered intensity.
    pub check_feasibility: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            lambda0: None,
            clamp: DEFAULT_CLAMP,
            check_feasibility: true,
        }
    }
}

/// A full forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredPath {
    /// State before the first observation (`λ_0`, zero error variance).
    pub initial: FilterState,
    pub states: Vec<FilterState>,
    pub steps: Vec<FilterStep>,
}

impl FilteredPath {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn lambda(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.lambda_filtered).collect()
    }

    /// `λ̂_{t-1|t-1}` aligned to each `t`, starting from `λ_0`.
    pub fn lambda_prev(&self) -> Vec<f64> {
        std::iter::once(self.initial.lambda_filtered)
            .chain(self.states.iter().map(|s| s.lambda_filtered))
            .take(self.states.len())
            .collect()
    }

    pub fn innovations(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.innovation).collect()
    }

    pub fn clamped_count(&self) -> usize {
        self.steps.iter().filter(|s| s.clamped).count()
    }
}

/// Expected observation variance factor `v̄`, so that `E[Var(Y|λ)] = (1-ω) v̄`.
pub fn vbar(spec: &ModelSpec) -> f64 {
    let p = &spec.params;
    let (mu, s2, w, a) = (p.mu(), p.sigma2(), p.omega, p.a);
    let second = s2 + mu * mu;
    match (spec.family, p.c) {
        (CountFamily::Zmp, _) => mu + w * second,
        (CountFamily::Zmnb, 0) => (1.0 + a) * mu + w * second,
        (CountFamily::Zmnb, _) => mu + (w + a) * second,
    }
}

/// Prior for the first observation: `(ρλ_0 + (1-ρ)μ_λ, (1-ρ²)σ²_λ)`.
pub fn gkf_init(spec: &ModelSpec, lambda0: f64) -> (f64, f64) {
    let p = &spec.params;
    (
        p.rho * lambda0 + (1.0 - p.rho) * p.mu(),
        (1.0 - p.rho * p.rho) * p.sigma2(),
    )
}

/// Quantities that stay fixed along one pass.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FilterConsts {
    pub rho: f64,
    pub omega: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub vbar: f64,
}

impl FilterConsts {
    pub fn new(spec: &ModelSpec) -> Self {
        let p = &spec.params;
        Self {
            rho: p.rho,
            omega: p.omega,
            mu: p.mu(),
            sigma2: p.sigma2(),
            vbar: vbar(spec),
        }
    }

    pub fn step(&self, prev: &FilterState, y: f64, clamp: f64) -> (FilterState, FilterStep) {
        let (rho, w) = (self.rho, self.omega);
        let prediction = rho * prev.lambda_filtered + (1.0 - rho) * self.mu;
        let pred_var = rho * rho * prev.error_var + (1.0 - rho * rho) * self.sigma2;
        let innovation_var = (1.0 - w) * (1.0 - w) * pred_var + (1.0 - w) * self.vbar;
        let gain = if pred_var == 0.0 || w >= 1.0 {
            0.0
        } else {
            (1.0 - w) * pred_var / innovation_var
        };
        let innovation = y - (1.0 - w) * prediction;
        let mut lambda = prediction + gain * innovation;
        let clamped = lambda <= 0.0;
        if clamped {
            lambda = clamp;
        }
        let error_var = ((1.0 - gain * (1.0 - w)) * pred_var).max(0.0);
        (
            FilterState {
                lambda_filtered: lambda,
                error_var,
            },
            FilterStep {
                prediction,
                pred_var,
                gain,
                innovation,
                innovation_var,
                clamped,
            },
        )
    }
}

/// One prediction/update step.
pub fn gkf_step(prev: &FilterState, y: u64, spec: &ModelSpec) -> Result<(FilterState, FilterStep)> {
    check_omega(spec.family, prev.lambda_filtered, &spec.params, None)?;
    let consts = FilterConsts::new(spec);
    if !(consts.vbar > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "expected observation variance v̄ = {} is not positive",
            consts.vbar
        )));
    }
    Ok(consts.step(prev, y as f64, DEFAULT_CLAMP))
}

pub fn gkf_filter(series: &CountSeries, spec: &ModelSpec) -> Result<FilteredPath> {
    gkf_filter_with(series, spec, &FilterOptions::default())
}

pub fn gkf_filter_with(
    series: &CountSeries,
    spec: &ModelSpec,
    options: &FilterOptions,
) -> Result<FilteredPath> {
    if series.is_empty() {
        return Err(Error::InvalidInput("cannot filter an empty series".into()));
    }
    spec.validate()?;
    let consts = FilterConsts::new(spec);
    if !(consts.vbar > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "expected observation variance v̄ = {} is not positive",
            consts.vbar
        )));
    }
    let lambda0 = options.lambda0.unwrap_or(consts.mu);
    if !(lambda0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda0 must be positive, got {lambda0}"
        )));
    }
    let initial = FilterState {
        lambda_filtered: lambda0,
        error_var: 0.0,
    };
    let mut states = Vec::with_capacity(series.len());
    let mut steps = Vec::with_capacity(series.len());
    let mut prev = initial;
    for (t, &y) in series.counts.iter().enumerate() {
        if options.check_feasibility {
            check_omega(spec.family, prev.lambda_filtered, &spec.params, Some(t))?;
        }
        let (state, step) = consts.step(&prev, y as f64, options.clamp);
        states.push(state);
        steps.push(step);
        prev = state;
    }
    Ok(FilteredPath {
        initial,
        states,
        steps,
    })
}
