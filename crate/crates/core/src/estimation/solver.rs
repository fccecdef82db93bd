//! Damped Newton solution of the combined estimating equations.
//!
//! The filtered intensities depend on θ, so the equations are solved on the
//! total map `θ ↦ G(θ, λ̂(θ))`: every evaluation re-runs the filter. Its roots
//! are exactly the fixed points of alternating "filter, then solve with the
//! filtered path held fixed", but the iteration does not oscillate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::pearson_residuals;
use crate::error::{Error, Result};
use crate::filter::{gkf_filter, gkf_filter_with, FilterOptions, FilteredPath, DEFAULT_CLAMP};
use crate::observation::{check_omega, omega_lower, CountFamily, CountSeries, ModelSpec, Params};

use super::auxiliary::{estimate_sigma2, estimate_sigma2_corrected, solve_quadratic_ef, A_FLOOR};
use super::bootstrap::ParamsSe;
use super::ef::{combined_ef, numerical_jacobian, EfEvaluation, ModelForm};
use super::init::{
    expected_baseline_zero, grid_starts, moment_init_ear1, moment_init_gar1_factorial,
    GammaQuadrature, GridConfig, SampleMoments, QUADRATURE_NODES,
};

const RHO_MAX: f64 = 0.999;
const OMEGA_MAX: f64 = 0.999;
const OMEGA_MARGIN: f64 = 1e-6;
/// Floor for μ_λ and σ²_λ (and hence for β and p through them).
const SCALE_FLOOR: f64 = 1e-4;
/// Residual norm treated as an exact root.
const EXACT_ROOT: f64 = 1e-12;

/// How starting values are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum InitStrategy {
    /// Solves from several starting points (the closed-form moment inversion
    /// when admissible, and the best grid point at each ρ level) and keeps the
    /// converged root with the smallest [`innovation_objective`].
    Auto,
    /// The single grid point that best matches the sample moments.
    Grid,
    /// Closed-form moment inversion (ZMP only), falling back to the grid.
    Moments,
    Fixed {
        params: Params,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Relative parameter change and per-observation EF norm required for convergence.
    pub tol: f64,
    pub max_iter: usize,
    pub a_max: f64,
    pub clamp: f64,
    pub jacobian_step: f64,
    pub max_halvings: usize,
    pub init: InitStrategy,
    pub grid: GridConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
            a_max: 10.0,
            clamp: DEFAULT_CLAMP,
            jacobian_step: 1e-5,
            max_halvings: 20,
            init: InitStrategy::Auto,
            grid: GridConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub ef_norm: f64,
    /// Accepted Newton step fraction (1 = full step).
    pub step_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub form: ModelForm,
    pub params_hat: Params,
    pub mu: f64,
    pub sigma2: f64,
    pub se: Option<ParamsSe>,
    pub init: Params,
    pub init_method: String,
    /// Number of starting points solved from.
    pub starts: usize,
    /// ω was chosen along a curve of exact roots to match the sample zero
    /// fraction (ZMNB with c = 1; see [`fit`]).
    #[serde(default)]
    pub omega_from_zero_fraction: bool,
    pub iterations: usize,
    pub converged: bool,
    /// Euclidean norm of the per-observation estimating function at the estimate.
    pub ef_norm: f64,
    pub ef_values: Vec<f64>,
    /// `Σ_t [ln J_t + h_t²/J_t]` on the filtered path at the estimate.
    pub innovation_objective: f64,
    pub theta_names: Vec<String>,
    /// Parameters sitting on a projection bound at the estimate.
    pub boundary: Vec<String>,
    /// Some iterate was projected back into the admissible region.
    pub projected: bool,
    /// ω is admissible at every filtered intensity.
    pub omega_feasible: bool,
    pub clamped_steps: usize,
    /// σ²_λ re-estimated from the filtered path, without and with the
    /// error-variance correction.
    pub sigma2_filtered_plain: Option<f64>,
    pub sigma2_filtered_corrected: Option<f64>,
    /// Dispersion root of the stand-alone quadratic equation at the estimate.
    pub a_quadratic: Option<f64>,
    pub trace: Vec<TraceEntry>,
    pub filtered: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            family: self.form.family,
            intensity: self.form.intensity,
            params: self.params_hat,
        }
    }

    /// Estimates in the order `(ρ, ω, β, p[, a])`.
    pub fn estimates(&self) -> Vec<f64> {
        let p = &self.params_hat;
        let mut v = vec![p.rho, p.omega, p.beta, p.p];
        if self.form.family == CountFamily::Zmnb {
            v.push(p.a);
        }
        v
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `(lower, upper)` for each working parameter. ω's lower bound is the
/// feasibility limit at the largest filtered intensity of the current iterate.
fn bounds(x: &[f64], form: &ModelForm, max_lambda: f64, a_max: f64) -> Vec<(f64, f64)> {
    let mut b = vec![
        (f64::NEG_INFINITY, OMEGA_MAX),
        (SCALE_FLOOR, f64::INFINITY),
        (0.0, RHO_MAX),
    ];
    if form.sigma2_index().is_some() {
        b.push((SCALE_FLOOR, f64::INFINITY));
    }
    if let Some(i) = form.a_index() {
        b.push((A_FLOOR, a_max));
        // ω's bound depends on a, so use the clipped value.
        let a = x[i].clamp(A_FLOOR, a_max);
        b[0].0 = omega_bound(form, max_lambda, a);
    } else {
        b[0].0 = omega_bound(form, max_lambda, 0.0);
    }
    b
}

fn omega_bound(form: &ModelForm, max_lambda: f64, a: f64) -> f64 {
    if max_lambda.is_finite() && max_lambda > 0.0 {
        omega_lower(form.family, max_lambda, a, form.c) + OMEGA_MARGIN
    } else {
        -1.0
    }
}

/// Clips `x` into the admissible box, returning the names of clipped parameters.
fn project(
    x: &[f64],
    form: &ModelForm,
    max_lambda: f64,
    a_max: f64,
) -> (Vec<f64>, Vec<&'static str>) {
    let names = form.names();
    let mut hits = Vec::new();
    let y = x
        .iter()
        .zip(bounds(x, form, max_lambda, a_max))
        .enumerate()
        .map(|(i, (&v, (lo, hi)))| {
            if v.is_nan() || v < lo || v > hi {
                hits.push(names[i]);
            }
            if v > hi {
                hi
            } else if v < lo || v.is_nan() {
                lo
            } else {
                v
            }
        })
        .collect();
    (y, hits)
}

/// Parameters of `x` lying on one of their bounds.
fn on_boundary(x: &[f64], form: &ModelForm, max_lambda: f64, a_max: f64) -> Vec<String> {
    let near = |v: f64, b: f64| b.is_finite() && (v - b).abs() <= 1e-9 * b.abs().max(1.0);
    x.iter()
        .zip(bounds(x, form, max_lambda, a_max))
        .zip(form.names())
        .filter(|((&v, (lo, hi)), _)| near(v, *lo) || near(v, *hi))
        .map(|(_, name)| name.to_string())
        .collect()
}

fn newton_direction(jacobian: &[Vec<f64>], f: &[f64]) -> Option<Vec<f64>> {
    let d = f.len();
    let m = DMatrix::from_fn(d, d, |i, j| jacobian[i][j]);
    let rhs = DVector::from_iterator(d, f.iter().map(|v| -v));
    let step = m
        .clone()
        .lu()
        .solve(&rhs)
        .or_else(|| m.svd(true, true).solve(&rhs, 1e-14).ok())?;
    step.iter()
        .all(|v| v.is_finite())
        .then(|| step.iter().copied().collect())
}

/// Solves the combined estimating equations from the starting values in
/// `spec.params`.
pub fn solve_ef_block(
    series: &CountSeries,
    spec: &ModelSpec,
    options: &FitOptions,
) -> Result<FitResult> {
    if series.len() < 3 {
        return Err(Error::InvalidInput(
            "need at least three counts to fit".into(),
        ));
    }
    let form = ModelForm::of(spec);
    let y = series.as_f64();
    let clamp = options.clamp;
    let evaluate = |x: &[f64]| combined_ef(&y, &form, x, clamp);

    let (mut x, mut hits) = project(
        &form.theta(&spec.params),
        &form,
        f64::INFINITY,
        options.a_max,
    );
    let mut eval = evaluate(&x)
        .map_err(|e| Error::InfeasibleInit(format!("starting values not evaluable: {e}")))?;
    // Re-project once ω's data-dependent lower bound is known.
    let (x1, more) = project(&x, &form, eval.max_lambda, options.a_max);
    if !more.is_empty() {
        x = x1;
        hits.extend(more);
        eval = evaluate(&x)
            .map_err(|e| Error::InfeasibleInit(format!("starting values not evaluable: {e}")))?;
    }
    let mut projected = !hits.is_empty();
    let init = form.params(&x);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        theta: x.clone(),
        ef_norm: norm(&eval.values),
        step_scale: 0.0,
    }];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iter {
        let current = norm(&eval.values);
        if current < EXACT_ROOT {
            converged = true;
            break;
        }
        iterations += 1;
        let jacobian = match numerical_jacobian(&x, options.jacobian_step, |z| {
            evaluate(z).map(|e| e.values)
        }) {
            Ok(j) => j,
            Err(_) => break,
        };
        let Some(direction) = newton_direction(&jacobian, &eval.values) else {
            break;
        };
        let mut accepted: Option<(Vec<f64>, EfEvaluation, f64)> = None;
        let mut scale = 1.0;
        for _ in 0..=options.max_halvings {
            let trial: Vec<f64> = x
                .iter()
                .zip(&direction)
                .map(|(a, d)| a + scale * d)
                .collect();
            let (candidate, hits) = project(&trial, &form, eval.max_lambda, options.a_max);
            if let Ok(e) = evaluate(&candidate) {
                if norm(&e.values) < current {
                    projected |= !hits.is_empty();
                    accepted = Some((candidate, e, scale));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((candidate, e, scale)) = accepted else {
            break;
        };
        let change = x
            .iter()
            .zip(&candidate)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1e-8))
            .fold(0.0, f64::max);
        x = candidate;
        eval = e;
        let ef_norm = norm(&eval.values);
        trace.push(TraceEntry {
            iteration: iterations,
            theta: x.clone(),
            ef_norm,
            step_scale: scale,
        });
        if ef_norm < EXACT_ROOT || (change < options.tol && ef_norm < options.tol) {
            converged = true;
            break;
        }
    }

    let params_hat = form.params(&x);
    let spec_hat = form.spec(&x);
    let filter_options = FilterOptions {
        lambda0: None,
        clamp,
        check_feasibility: false,
    };
    let path = gkf_filter_with(series, &spec_hat, &filter_options)?;
    let lambda = path.lambda();
    let max_lambda = lambda.iter().copied().fold(0.0, f64::max);
    let residuals = pearson_residuals(series, &lambda, &spec_hat)?.values;
    let (mu, sigma2) = (params_hat.mu(), params_hat.sigma2());
    let ef_norm = norm(&eval.values);
    Ok(FitResult {
        form,
        params_hat,
        mu,
        sigma2,
        se: None,
        init,
        init_method: "given".into(),
        starts: 1,
        omega_from_zero_fraction: false,
        iterations,
        converged,
        ef_norm,
        ef_values: eval.values,
        innovation_objective: innovation_objective_on(&path),
        theta_names: form.names().iter().map(|s| s.to_string()).collect(),
        boundary: on_boundary(&x, &form, max_lambda, options.a_max),
        projected,
        omega_feasible: check_omega(form.family, max_lambda, &params_hat, None).is_ok(),
        clamped_steps: path.clamped_count(),
        sigma2_filtered_plain: estimate_sigma2(&lambda, params_hat.rho, mu).ok(),
        sigma2_filtered_corrected: estimate_sigma2_corrected(&path, params_hat.rho, mu).ok(),
        a_quadratic: (form.family == CountFamily::Zmnb)
            .then(|| {
                solve_quadratic_ef(series, &lambda, &spec_hat, options.a_max)
                    .ok()
                    .map(|r| r.a)
            })
            .flatten(),
        trace,
        filtered: lambda,
        residuals,
    })
}

fn innovation_objective_on(path: &FilteredPath) -> f64 {
    path.steps
        .iter()
        .map(|s| s.innovation_var.ln() + s.innovation * s.innovation / s.innovation_var)
        .sum()
}

/// Gaussian quasi-likelihood criterion of the one-step innovations,
/// `Σ_t [ln J_t + h_t²/J_t]`, with the filter run at `spec`. Smaller is better.
pub fn innovation_objective(series: &CountSeries, spec: &ModelSpec) -> Result<f64> {
    Ok(innovation_objective_on(&gkf_filter(series, spec)?))
}

fn moment_candidate(sample: &SampleMoments, form: &ModelForm) -> Result<Params> {
    if form.family != CountFamily::Zmp {
        return Err(Error::InfeasibleInit(
            "closed-form initializers cover ZMP models only".into(),
        ));
    }
    let p = match form.intensity {
        crate::intensity::IntensityFamily::Gar1 => moment_init_gar1_factorial(sample)?,
        crate::intensity::IntensityFamily::Ear1 => moment_init_ear1(sample)?,
    };
    let spec = ModelSpec {
        family: form.family,
        intensity: form.intensity,
        params: p,
    };
    spec.validate()
        .map_err(|e| Error::InfeasibleInit(e.to_string()))?;
    if !(crate::filter::vbar(&spec) > 0.0) {
        return Err(Error::InfeasibleInit(
            "moment estimate gives a non-positive observation variance".into(),
        ));
    }
    Ok(p)
}

/// Starting values and a label for how they were obtained. For
/// [`InitStrategy::Auto`] this is the first of the candidate starts.
pub fn initial_values(
    series: &CountSeries,
    form: &ModelForm,
    options: &FitOptions,
) -> Result<(Params, String)> {
    starting_points(series, form, options)?
        .into_iter()
        .next()
        .ok_or(Error::EmptyGrid)
}

fn starting_points(
    series: &CountSeries,
    form: &ModelForm,
    options: &FitOptions,
) -> Result<Vec<(Params, String)>> {
    let sample = SampleMoments::from_series(series)?;
    let grid = || super::init::grid_search_moments(&sample, form, &options.grid);
    match options.init {
        InitStrategy::Fixed { params } => Ok(vec![(
            Params {
                c: form.c,
                ..params
            },
            "fixed".into(),
        )]),
        InitStrategy::Grid => grid().map(|g| vec![(g.params, "grid".into())]),
        InitStrategy::Moments => match moment_candidate(&sample, form) {
            Ok(p) => Ok(vec![(p, "moments".into())]),
            Err(_) => grid().map(|g| vec![(g.params, "grid (moment inversion infeasible)".into())]),
        },
        InitStrategy::Auto => {
            let mut starts: Vec<(Params, String)> = moment_candidate(&sample, form)
                .map(|p| (p, "moments".to_string()))
                .into_iter()
                .collect();
            match grid_starts(&sample, form, &options.grid) {
                Ok(g) => starts.extend(
                    g.into_iter()
                        .map(|c| (c.params, format!("grid rho={:.3}", c.params.rho))),
                ),
                Err(e) if starts.is_empty() => return Err(e),
                Err(_) => {}
            }
            Ok(starts)
        }
    }
}

/// Ranks fits for root selection: converged interior roots first, then
/// converged boundary roots, then the rest; ties broken by the innovation
/// objective and then by the EF norm.
fn selection_key(r: &FitResult) -> (u8, f64, f64) {
    let class = match (r.converged, r.boundary.is_empty()) {
        (true, true) => 0,
        (true, false) => 1,
        _ => 2,
    };
    let objective = if r.innovation_objective.is_finite() {
        r.innovation_objective
    } else {
        f64::INFINITY
    };
    (class, objective, r.ef_norm)
}

/// Points of the curve `ω ↦ θ(ω)` that keeps `(1-ω)μ`, `(1-ω)²σ²`, ρ and
/// `κ = (a+ω)/(1-ω)` fixed. For ZMNB with c = 1 the conditional mean and
/// variance of the counts depend on ω and a only through `(1-ω)λ` and κ, so
/// the estimating equations take the same value everywhere on the curve.
fn along_unidentified_curve(p: &Params, omega: f64) -> Params {
    let kappa = (p.a + p.omega) / (1.0 - p.omega);
    let scale = (1.0 - p.omega) / (1.0 - omega);
    Params {
        omega,
        beta: p.beta / scale,
        a: kappa * (1.0 - omega) - omega,
        ..*p
    }
}

/// Moves a ZMNB (c = 1) estimate along its curve of exact roots to the point
/// whose marginal zero probability equals `zero_fraction`. Returns `None`
/// when no admissible point on the curve matches.
fn match_zero_fraction(
    p: &Params,
    max_lambda: f64,
    zero_fraction: f64,
    a_max: f64,
) -> Option<Params> {
    let kappa = (p.a + p.omega) / (1.0 - p.omega);
    // a(ω) = κ(1-ω) - ω is decreasing in ω.
    let hi = ((kappa - A_FLOOR) / (1.0 + kappa)).min(OMEGA_MAX);
    let lo = ((kappa - a_max) / (1.0 + kappa)).max(-1.0 + 1e-6);
    if !(hi > lo) {
        return None;
    }
    let rule = GammaQuadrature::new(p.p, QUADRATURE_NODES);
    let admissible = |w: f64| {
        let q = along_unidentified_curve(p, w);
        let top = max_lambda * (1.0 - p.omega) / (1.0 - w);
        w >= omega_lower(CountFamily::Zmnb, top, q.a, 1) + OMEGA_MARGIN
    };
    let gap = |w: f64| {
        let q = along_unidentified_curve(p, w);
        let spec = ModelSpec {
            family: CountFamily::Zmnb,
            intensity: crate::intensity::IntensityFamily::Gar1,
            params: q,
        };
        q.omega + (1.0 - q.omega) * expected_baseline_zero(&spec, Some(&rule)) - zero_fraction
    };
    const SCAN: usize = 400;
    let points: Vec<(f64, f64)> = (0..=SCAN)
        .map(|i| lo + (hi - lo) * i as f64 / SCAN as f64)
        .filter(|&w| admissible(w))
        .map(|w| (w, gap(w)))
        .filter(|(_, g)| g.is_finite())
        .collect();
    // Among sign changes, refine the one nearest the current ω.
    let bracket = points
        .windows(2)
        .filter(|w| w[0].1 == 0.0 || w[0].1.signum() != w[1].1.signum())
        .min_by(|a, b| {
            (a[0].0 - p.omega)
                .abs()
                .total_cmp(&(b[0].0 - p.omega).abs())
        })?;
    let (mut a, mut b) = (bracket[0], bracket[1]);
    for _ in 0..100 {
        let m = 0.5 * (a.0 + b.0);
        let gm = gap(m);
        if gm == 0.0 || (b.0 - a.0) < 1e-13 {
            return Some(along_unidentified_curve(p, m));
        }
        if gm.signum() == a.1.signum() {
            a = (m, gm);
        } else {
            b = (m, gm);
        }
    }
    Some(along_unidentified_curve(p, 0.5 * (a.0 + b.0)))
}

/// Chooses starting values and solves the estimating equations.
///
/// With [`InitStrategy::Auto`] several starts are solved and the converged
/// root with the smallest [`innovation_objective`] is kept. For ZMNB with
/// c = 1 the equations cannot separate ω from a (see
/// [`FitResult::omega_from_zero_fraction`]); the selected root is moved along
/// the curve of equivalent roots to match the sample zero fraction.
pub fn fit(series: &CountSeries, form: &ModelForm, options: &FitOptions) -> Result<FitResult> {
    let starts = starting_points(series, form, options)?;
    let total = starts.len();
    let mut best: Option<FitResult> = None;
    let mut last_error = None;
    for (init, method) in starts {
        let spec = ModelSpec {
            family: form.family,
            intensity: form.intensity,
            params: init,
        };
        match solve_ef_block(series, &spec, options) {
            Ok(mut r) => {
                r.init_method = method;
                r.starts = total;
                if best
                    .as_ref()
                    .is_none_or(|b| selection_key(&r) < selection_key(b))
                {
                    best = Some(r);
                }
            }
            Err(e) => last_error = Some(e),
        }
    }
    let best = best.ok_or_else(|| last_error.unwrap_or(Error::EmptyGrid))?;
    if form.family == CountFamily::Zmnb && form.c == 1 && best.converged {
        let zero_fraction =
            series.counts.iter().filter(|&&y| y == 0).count() as f64 / series.len() as f64;
        let max_lambda = best.filtered.iter().copied().fold(0.0, f64::max);
        if let Some(moved) =
            match_zero_fraction(&best.params_hat, max_lambda, zero_fraction, options.a_max)
        {
            let spec = ModelSpec {
                family: form.family,
                intensity: form.intensity,
                params: moved,
            };
            let mut r = solve_ef_block(series, &spec, options)?;
            r.init = best.init;
            r.init_method = best.init_method.clone();
            r.starts = best.starts;
            r.iterations += best.iterations;
            let mut trace = best.trace.clone();
            trace.extend(r.trace.into_iter().skip(1));
            r.trace = trace;
            r.projected |= best.projected;
            r.omega_from_zero_fraction = true;
            return Ok(r);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::{simulate_intensity, IntensityFamily};
    use crate::observation::zm_sample;
    use crate::rng::seeded;

    fn simulate(spec: &ModelSpec, n: usize, seed: u64) -> CountSeries {
        let mut rng = seeded(seed);
        let lambda = simulate_intensity(&spec.intensity_spec(), n, &mut rng).unwrap();
        zm_sample(spec.family, &lambda, &spec.params, &mut rng).unwrap()
    }

    #[test]
    fn recovers_parameters_from_a_long_series() {
        let spec = ModelSpec::new(
            CountFamily::Zmp,
            IntensityFamily::Gar1,
            Params::zmp(0.2, 0.8, 2.0, 4.0),
        )
        .unwrap();
        let series = simulate(&spec, 20_000, 1);
        let fitted = fit(&series, &ModelForm::of(&spec), &FitOptions::default()).unwrap();
        assert!(fitted.converged, "{fitted:?}");
        let p = fitted.params_hat;
        assert!((p.rho - 0.8).abs() < 0.03, "rho {}", p.rho);
        assert!((p.omega - 0.2).abs() < 0.03, "omega {}", p.omega);
        assert!((p.mu() - 2.0).abs() < 0.15, "mu {}", p.mu());
        assert!(fitted.ef_norm < 1e-6);
        assert_eq!(fitted.filtered.len(), series.len());
        assert_eq!(fitted.residuals.len(), series.len());
    }

    #[test]
    fn ear1_fit_converges() {
        let spec = ModelSpec::new(
            CountFamily::Zmp,
            IntensityFamily::Ear1,
            Params::zmp(0.3, 0.6, 0.5, 1.0),
        )
        .unwrap();
        let series = simulate(&spec, 5000, 2);
        let fitted = fit(&series, &ModelForm::of(&spec), &FitOptions::default()).unwrap();
        assert!(fitted.converged);
        assert_eq!(fitted.params_hat.p, 1.0);
        assert!((fitted.params_hat.omega - 0.3).abs() < 0.08);
    }

    #[test]
    fn same_input_gives_identical_results() {
        let spec = ModelSpec::new(
            CountFamily::Zmp,
            IntensityFamily::Gar1,
            Params::zmp(0.2, 0.8, 2.0, 4.0),
        )
        .unwrap();
        let series = simulate(&spec, 500, 3);
        let a = fit(&series, &ModelForm::of(&spec), &FitOptions::default()).unwrap();
        let b = fit(&series, &ModelForm::of(&spec), &FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn projection_respects_bounds() {
        let form = ModelForm::new(CountFamily::Zmnb, IntensityFamily::Gar1, 1);
        let (y, hits) = project(&[-5.0, -1.0, 1.5, 0.0, 50.0], &form, 3.0, 10.0);
        assert_eq!(y[1], SCALE_FLOOR);
        assert_eq!(y[2], RHO_MAX);
        assert_eq!(y[3], SCALE_FLOOR);
        assert_eq!(y[4], 10.0);
        assert!(y[0] > omega_lower(CountFamily::Zmnb, 3.0, 10.0, 1));
        assert_eq!(hits.len(), 5);
    }
}
