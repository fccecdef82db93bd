//! Starting values: closed-form moment inversions and a moment-matching grid search.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};
use crate::filter::vbar;
use crate::intensity::IntensityFamily;
use crate::observation::{
    count_acf, marginal_count_moments, omega_lower, CountFamily, CountSeries, ModelSpec, Params,
};
use crate::stats::{mean, sample_acf_at, variance};

use super::ModelForm;

/// Summary statistics of a count series used by the initializers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub ybar: f64,
    /// Sample variance (`n - 1` denominator).
    pub s2: f64,
    pub r1: f64,
    pub r2: f64,
    pub zero_fraction: f64,
    /// Factorial moments `E[Y]`, `E[Y(Y-1)]`, `E[Y(Y-1)(Y-2)]`.
    pub factorial: [f64; 3],
}

impl SampleMoments {
    pub fn from_series(series: &CountSeries) -> Result<Self> {
        if series.len() < 3 {
            return Err(Error::InvalidInput("need at least three counts".into()));
        }
        let y = series.as_f64();
        let s2 = variance(&y);
        if s2 == 0.0 {
            return Err(Error::ConstantSeries);
        }
        let factorial = [
            mean(&y),
            mean(&y.iter().map(|v| v * (v - 1.0)).collect::<Vec<_>>()),
            mean(
                &y.iter()
                    .map(|v| v * (v - 1.0) * (v - 2.0))
                    .collect::<Vec<_>>(),
            ),
        ];
        Ok(Self {
            ybar: factorial[0],
            s2,
            r1: sample_acf_at(&y, 1),
            r2: sample_acf_at(&y, 2),
            zero_fraction: y.iter().filter(|&&v| v == 0.0).count() as f64 / y.len() as f64,
            factorial,
        })
    }

    /// The same statistics computed from the model itself.
    pub fn population(spec: &ModelSpec) -> Self {
        Self::population_given(spec, expected_baseline_zero(spec, None))
    }

    /// [`Self::population`] with `E[P0(λ)]` supplied, since it does not depend on ρ or ω.
    fn population_given(spec: &ModelSpec, baseline_zero: f64) -> Self {
        let p = &spec.params;
        let (ybar, s2) = marginal_count_moments(spec);
        // Raw moments of the gamma intensity.
        let (b, k) = (p.beta, p.p);
        let m1 = k / b;
        let m2 = k * (k + 1.0) / (b * b);
        let m3 = k * (k + 1.0) * (k + 2.0) / (b * b * b);
        let q = 1.0 - p.omega;
        let a = p.a;
        let factorial = match (spec.family, p.c) {
            (CountFamily::Zmp, _) => [q * m1, q * m2, q * m3],
            // E[Y(Y-1)|λ] = λ² + aλ and E[Y(Y-1)(Y-2)|λ] = λ(λ+a)(λ+2a).
            (CountFamily::Zmnb, 0) => [
                q * m1,
                q * (m2 + a * m1),
                q * (m3 + 3.0 * a * m2 + 2.0 * a * a * m1),
            ],
            // E[Y(Y-1)|λ] = (1+a)λ² and E[Y(Y-1)(Y-2)|λ] = (1+a)(1+2a)λ³.
            (CountFamily::Zmnb, _) => [
                q * m1,
                q * (1.0 + a) * m2,
                q * (1.0 + a) * (1.0 + 2.0 * a) * m3,
            ],
        };
        Self {
            ybar,
            s2,
            r1: count_acf(spec, 1),
            r2: count_acf(spec, 2),
            zero_fraction: p.omega + q * baseline_zero,
            factorial,
        }
    }
}

/// Nodes used for `E[P0(λ)]` when it has no closed form.
pub(crate) const QUADRATURE_NODES: usize = 48;

/// `E[P0(λ)]` under the gamma marginal. `rule` may carry a prebuilt
/// quadrature for the spec's shape.
pub(crate) fn expected_baseline_zero(spec: &ModelSpec, rule: Option<&GammaQuadrature>) -> f64 {
    let p = &spec.params;
    match (spec.family, p.c) {
        (CountFamily::Zmp, _) => (p.beta / (p.beta + 1.0)).powf(p.p),
        (CountFamily::Zmnb, 0) => (p.beta / (p.beta + p.a.ln_1p() / p.a)).powf(p.p),
        (CountFamily::Zmnb, _) => {
            let f = |l: f64| (-(p.a * l).ln_1p() / p.a).exp();
            match rule {
                Some(r) => r.expect(p.beta, f),
                None => GammaQuadrature::new(p.p, QUADRATURE_NODES).expect(p.beta, f),
            }
        }
    }
}

/// Generalized Gauss-Laguerre rule for expectations under Gamma(shape, ·),
/// built with the Golub-Welsch eigenvalue method.
pub(crate) struct GammaQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GammaQuadrature {
    pub(crate) fn new(shape: f64, n: usize) -> Self {
        let alpha = shape - 1.0;
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0 * i as f64 + alpha + 1.0
            } else if i + 1 == j || j + 1 == i {
                let k = i.max(j) as f64;
                (k * (k + alpha)).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let nodes = eig.eigenvalues.iter().copied().collect();
        let weights = (0..n).map(|i| eig.eigenvectors[(0, i)].powi(2)).collect();
        Self { nodes, weights }
    }

    /// `E[f(λ)]` for `λ ~ Gamma(shape, rate)`.
    fn expect(&self, rate: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x / rate))
            .sum()
    }
}

fn infeasible(msg: impl Into<String>) -> Error {
    Error::InfeasibleInit(msg.into())
}

/// ZMP-EAR(1) inversion of `(Ȳ, s², r1)`:
/// `z = (s²/Ȳ - 1)/Ȳ`, `ω = (z-1)/(z+1)`, `μ = Ȳ/(1-ω)`,
/// `ρ = r1 (1 + (1+ω)μ) / ((1-ω)μ)`.
pub fn moment_init_ear1(m: &SampleMoments) -> Result<Params> {
    if !(m.ybar > 0.0) {
        return Err(infeasible("sample mean must be positive"));
    }
    let z = (m.s2 / m.ybar - 1.0) / m.ybar;
    let omega = (z - 1.0) / (z + 1.0);
    if !(omega.is_finite() && omega < 1.0 && omega > -1.0) {
        return Err(infeasible(format!("omega = {omega} from z = {z}")));
    }
    let mu = m.ybar / (1.0 - omega);
    let rho = m.r1 * (1.0 + (1.0 + omega) * mu) / ((1.0 - omega) * mu);
    if !(0.0..1.0).contains(&rho) {
        return Err(infeasible(format!("rho = {rho} outside [0, 1)")));
    }
    Ok(Params::zmp(omega, rho, 1.0 / mu, 1.0))
}

/// ZMP-GAR(1) inversion of the first three factorial moments:
/// `r2 = ȳ2/ȳ1`, `r3 = ȳ3/ȳ2`, `β = 1/(r3 - r2)`, `p = r2 β - 1`,
/// `ω = 1 - ȳ1 β/p`, and ρ from `r1` with the gamma moments.
pub fn moment_init_gar1_factorial(m: &SampleMoments) -> Result<Params> {
    let [y1, y2, y3] = m.factorial;
    if !(y1 > 0.0 && y2 > 0.0 && y3 > 0.0) {
        return Err(infeasible("factorial moments must be positive"));
    }
    let (r2, r3) = (y2 / y1, y3 / y2);
    if !(r3 > r2) {
        return Err(infeasible(format!("r3 = {r3} does not exceed r2 = {r2}")));
    }
    let beta = 1.0 / (r3 - r2);
    let p = r2 * beta - 1.0;
    if !(p > 0.0) {
        return Err(infeasible(format!("shape p = {p} is not positive")));
    }
    let omega = 1.0 - y1 * beta / p;
    if !(omega < 1.0) {
        return Err(infeasible(format!("omega = {omega} is not below 1")));
    }
    let (mu, s2) = (p / beta, p / (beta * beta));
    let rho = m.r1 * (mu + s2 + omega * mu * mu) / ((1.0 - omega) * s2);
    if !(0.0..1.0).contains(&rho) {
        return Err(infeasible(format!("rho = {rho} outside [0, 1)")));
    }
    Ok(Params::zmp(omega, rho, beta, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    pub fn single(value: f64) -> Self {
        Self {
            min: value,
            max: value,
            steps: 1,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.min + h * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub rho: GridAxis,
    pub omega: GridAxis,
    pub beta: GridAxis,
    /// Ignored for EAR(1), where p = 1.
    pub p: GridAxis,
    /// Ignored for ZMP.
    pub a: GridAxis,
    /// Upper quantile of the intensity marginal at which a negative ω must
    /// still be admissible.
    pub feasibility_quantile: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rho: GridAxis::new(0.05, 0.95, 10),
            omega: GridAxis::new(-0.4, 0.9, 14),
            beta: GridAxis::new(0.25, 5.0, 10),
            p: GridAxis::new(0.25, 5.0, 10),
            a: GridAxis::new(0.05, 2.0, 8),
            feasibility_quantile: 0.99,
        }
    }
}

impl GridConfig {
    /// A grid with the single point `params`.
    pub fn at(params: &Params) -> Self {
        Self {
            rho: GridAxis::single(params.rho),
            omega: GridAxis::single(params.omega),
            beta: GridAxis::single(params.beta),
            p: GridAxis::single(params.p),
            a: GridAxis::single(params.a),
            feasibility_quantile: 0.99,
        }
    }
}

/// Squared mismatch between sample and model statistics: relative errors in
/// mean and variance, absolute errors in the lag-1 and lag-2 autocorrelations
/// and in the zero fraction.
pub fn moment_objective(sample: &SampleMoments, spec: &ModelSpec) -> f64 {
    moment_objective_given(sample, spec, expected_baseline_zero(spec, None))
}

fn moment_objective_given(sample: &SampleMoments, spec: &ModelSpec, baseline_zero: f64) -> f64 {
    let model = SampleMoments::population_given(spec, baseline_zero);
    let rel = |s: f64, m: f64| ((s - m) / s).powi(2);
    rel(sample.ybar, model.ybar)
        + rel(sample.s2, model.s2)
        + (sample.r1 - model.r1).powi(2)
        + (sample.r2 - model.r2).powi(2)
        + (sample.zero_fraction - model.zero_fraction).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridChoice {
    pub params: Params,
    pub objective: f64,
    pub evaluated: usize,
}

/// Whether a candidate is usable as a starting point: valid parameters, a
/// positive expected observation variance, and a negative ω that stays
/// admissible up to the given intensity quantile.
fn admissible(spec: &ModelSpec, upper_lambda: f64) -> bool {
    if spec.validate().is_err() || !(vbar(spec) > 0.0) {
        return false;
    }
    let p = &spec.params;
    p.omega >= 0.0 || p.omega >= omega_lower(spec.family, upper_lambda, p.a, p.c)
}

/// Grid point minimizing [`moment_objective`].
pub fn grid_search(
    series: &CountSeries,
    form: &ModelForm,
    grid: &GridConfig,
) -> Result<GridChoice> {
    let sample = SampleMoments::from_series(series)?;
    grid_search_moments(&sample, form, grid)
}

pub fn grid_search_moments(
    sample: &SampleMoments,
    form: &ModelForm,
    grid: &GridConfig,
) -> Result<GridChoice> {
    let (per_rho, evaluated) = best_per_rho(sample, form, grid);
    per_rho
        .into_iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .map(|b| GridChoice { evaluated, ..b })
        .ok_or(Error::EmptyGrid)
}

/// The best admissible grid point at each ρ level, in increasing ρ. Used as
/// a spread of starting values, since the estimating equations can have
/// several roots along the ρ direction.
pub fn grid_starts(
    sample: &SampleMoments,
    form: &ModelForm,
    grid: &GridConfig,
) -> Result<Vec<GridChoice>> {
    let (per_rho, evaluated) = best_per_rho(sample, form, grid);
    if per_rho.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(per_rho
        .into_iter()
        .map(|b| GridChoice { evaluated, ..b })
        .collect())
}

fn best_per_rho(
    sample: &SampleMoments,
    form: &ModelForm,
    grid: &GridConfig,
) -> (Vec<GridChoice>, usize) {
    let shapes = match form.intensity {
        IntensityFamily::Gar1 => grid.p.points(),
        IntensityFamily::Ear1 => vec![1.0],
    };
    let dispersions = match form.family {
        CountFamily::Zmp => vec![0.0],
        CountFamily::Zmnb => grid.a.points(),
    };
    let rhos = grid.rho.points();
    let mut best: Vec<Option<GridChoice>> = vec![None; rhos.len()];
    let mut evaluated = 0;
    let needs_rule = form.family == CountFamily::Zmnb && form.c == 1;
    for &p in &shapes {
        let rule = needs_rule.then(|| GammaQuadrature::new(p, QUADRATURE_NODES));
        for &beta in &grid.beta.points() {
            let upper = Gamma::new(p, beta)
                .map_or(f64::INFINITY, |g| g.inverse_cdf(grid.feasibility_quantile));
            for &a in &dispersions {
                let base = ModelSpec {
                    family: form.family,
                    intensity: form.intensity,
                    params: Params {
                        omega: 0.0,
                        rho: 0.0,
                        beta,
                        p,
                        a,
                        c: form.c,
                    },
                };
                let baseline_zero = expected_baseline_zero(&base, rule.as_ref());
                for (slot, &rho) in best.iter_mut().zip(&rhos) {
                    for &omega in &grid.omega.points() {
                        let spec = base.with_params(Params {
                            omega,
                            rho,
                            ..base.params
                        });
                        if !admissible(&spec, upper) {
                            continue;
                        }
                        evaluated += 1;
                        let objective = moment_objective_given(sample, &spec, baseline_zero);
                        if objective.is_finite() && slot.is_none_or(|b| objective < b.objective) {
                            *slot = Some(GridChoice {
                                params: spec.params,
                                objective,
                                evaluated: 0,
                            });
                        }
                    }
                }
            }
        }
    }
    (best.into_iter().flatten().collect(), evaluated)
}

/// Grid-search starting point.
pub fn grid_search_init(
    series: &CountSeries,
    form: &ModelForm,
    grid: &GridConfig,
) -> Result<Params> {
    grid_search(series, form, grid).map(|choice| choice.params)
}
