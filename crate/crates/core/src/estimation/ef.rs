//! Estimating functions built on the filter innovations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{vbar, FilterConsts, FilterState};
use crate::intensity::IntensityFamily;
use crate::observation::{CountFamily, CountSeries, ModelSpec, Params};

/// Evaluated estimating-function components and their Jacobian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfSystem {
    pub components: Vec<f64>,
    /// Row `i`, column `j` holds `∂g_i/∂θ_j`.
    pub jacobian: Vec<Vec<f64>>,
}

/// Everything about a model except its parameter values.
///
/// It also fixes the working vector `θ = (ω, μ_λ, ρ[, σ²_λ][, a])` used by the
/// solver: σ²_λ is free for GAR(1) and tied to `μ_λ²` for EAR(1), and `a` is
/// present for ZMNB only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelForm {
    pub family: CountFamily,
    pub intensity: IntensityFamily,
    pub c: u8,
}

impl ModelForm {
    pub fn new(family: CountFamily, intensity: IntensityFamily, c: u8) -> Self {
        Self {
            family,
            intensity,
            c,
        }
    }

    pub fn of(spec: &ModelSpec) -> Self {
        Self::new(spec.family, spec.intensity, spec.params.c)
    }

    fn has_sigma2(&self) -> bool {
        self.intensity == IntensityFamily::Gar1
    }

    fn has_a(&self) -> bool {
        self.family == CountFamily::Zmnb
    }

    pub fn dim(&self) -> usize {
        3 + self.has_sigma2() as usize + self.has_a() as usize
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut names = vec!["omega", "mu", "rho"];
        if self.has_sigma2() {
            names.push("sigma2");
        }
        if self.has_a() {
            names.push("a");
        }
        names
    }

    pub fn sigma2_index(&self) -> Option<usize> {
        self.has_sigma2().then_some(3)
    }

    pub fn a_index(&self) -> Option<usize> {
        self.has_a().then(|| self.dim() - 1)
    }

    pub fn theta(&self, p: &Params) -> Vec<f64> {
        let mut x = vec![p.omega, p.mu(), p.rho];
        if self.has_sigma2() {
            x.push(p.sigma2());
        }
        if self.has_a() {
            x.push(p.a);
        }
        x
    }

    pub fn params(&self, x: &[f64]) -> Params {
        let (omega, mu, rho) = (x[0], x[1], x[2]);
        let a = self.a_index().map_or(0.0, |i| x[i]);
        match self.sigma2_index() {
            Some(i) => Params::from_moments(omega, rho, mu, x[i], a, self.c),
            None => Params {
                omega,
                rho,
                beta: 1.0 / mu,
                p: 1.0,
                a,
                c: self.c,
            },
        }
    }

    pub fn spec(&self, x: &[f64]) -> ModelSpec {
        ModelSpec {
            family: self.family,
            intensity: self.intensity,
            params: self.params(x),
        }
    }
}

/// Derivatives of `v̄` with respect to `(ω, μ, σ², a)`.
fn vbar_gradient(family: CountFamily, p: &Params) -> [f64; 4] {
    let (mu, s2, w, a) = (p.mu(), p.sigma2(), p.omega, p.a);
    let second = s2 + mu * mu;
    match (family, p.c) {
        (CountFamily::Zmp, _) => [second, 1.0 + 2.0 * w * mu, w, 0.0],
        (CountFamily::Zmnb, 0) => [second, 1.0 + a + 2.0 * w * mu, w, mu],
        (CountFamily::Zmnb, _) => [second, 1.0 + 2.0 * (w + a) * mu, w + a, second],
    }
}

/// Per-step innovation `h`, its variance `J`, and their derivatives with
/// respect to `(ω, μ, ρ, σ², a)`, holding `λ̂_{t-1}` and `C_{t-1}` fixed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct InnovationTerms {
    pub h: f64,
    pub j: f64,
    pub dh: [f64; 5],
    pub dj: [f64; 5],
}

pub(crate) fn innovation_terms(
    consts: &FilterConsts,
    grad_v: &[f64; 4],
    prev: &FilterState,
    y: f64,
) -> InnovationTerms {
    let (rho, w, mu, s2, v) = (
        consts.rho,
        consts.omega,
        consts.mu,
        consts.sigma2,
        consts.vbar,
    );
    let (lam, c_prev) = (prev.lambda_filtered, prev.error_var);
    let pred = rho * lam + (1.0 - rho) * mu;
    let c_pred = rho * rho * c_prev + (1.0 - rho * rho) * s2;
    let q = 1.0 - w;
    let j = q * q * c_pred + q * v;
    let h = y - q * pred;
    let dh = [pred, -q * (1.0 - rho), -q * (lam - mu), 0.0, 0.0];
    let dj = [
        -2.0 * q * c_pred - v + q * grad_v[0],
        q * grad_v[1],
        q * q * 2.0 * rho * (c_prev - s2),
        q * q * (1.0 - rho * rho) + q * grad_v[2],
        q * grad_v[3],
    ];
    InnovationTerms { h, j, dh, dj }
}

/// Output of one filter-and-evaluate pass of the combined estimating function.
#[derive(Debug, Clone)]
pub(crate) struct EfEvaluation {
    /// Components divided by `n`, in the order of [`ModelForm::names`].
    pub values: Vec<f64>,
    pub max_lambda: f64,
}

/// Filters the series at `θ` and evaluates the combined linear and quadratic
/// innovation estimating function
///
/// `G_i(θ) = (1/n) Σ_t [ ∂h_t/∂θ_i · h_t/J_t + (h_t²/J_t - 1) · ∂J_t/∂θ_i / (2 J_t) ]`.
///
/// Filtered values are treated as constants in the derivatives. The EAR(1)
/// form folds the σ² component into μ through `σ² = μ²`.
pub(crate) fn combined_ef(
    y: &[f64],
    form: &ModelForm,
    x: &[f64],
    clamp: f64,
) -> Result<EfEvaluation> {
    let spec = form.spec(x);
    let consts = FilterConsts::new(&spec);
    if !(consts.vbar > 0.0) || !(consts.sigma2 > 0.0) || !(consts.mu > 0.0) {
        return Err(Error::InvalidSpec(
            "non-positive variance at the current iterate".into(),
        ));
    }
    let grad_v = vbar_gradient(spec.family, &spec.params);
    let mut prev = FilterState {
        lambda_filtered: consts.mu,
        error_var: 0.0,
    };
    let mut full = [0.0; 5];
    let mut max_lambda = 0.0f64;
    for (t, &yt) in y.iter().enumerate() {
        let terms = innovation_terms(&consts, &grad_v, &prev, yt);
        if !(terms.j > 0.0) {
            return Err(Error::DegenerateWeight { index: t });
        }
        let lin = terms.h / terms.j;
        let quad = 0.5 * (terms.h * terms.h / terms.j - 1.0) / terms.j;
        for ((f, dh), dj) in full.iter_mut().zip(&terms.dh).zip(&terms.dj) {
            *f += dh * lin + dj * quad;
        }
        let (state, _) = consts.step(&prev, yt, clamp);
        max_lambda = max_lambda.max(state.lambda_filtered);
        prev = state;
    }
    let n = y.len() as f64;
    let mut values = vec![full[0] / n, full[1] / n, full[2] / n];
    match form.intensity {
        IntensityFamily::Gar1 => values.push(full[3] / n),
        IntensityFamily::Ear1 => values[1] += 2.0 * consts.mu * full[3] / n,
    }
    if form.family == CountFamily::Zmnb {
        values.push(full[4] / n);
    }
    Ok(EfEvaluation { values, max_lambda })
}

/// Central-difference Jacobian of `f` with relative step `rel_step`.
pub(crate) fn numerical_jacobian<F>(x: &[f64], rel_step: f64, mut f: F) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let d = x.len();
    let mut columns = Vec::with_capacity(d);
    for j in 0..d {
        let step = rel_step * x[j].abs().max(1e-2);
        let mut up = x.to_vec();
        let mut down = x.to_vec();
        up[j] += step;
        down[j] -= step;
        let (fu, fd) = (f(&up)?, f(&down)?);
        columns.push(
            fu.iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) / (2.0 * step))
                .collect::<Vec<f64>>(),
        );
    }
    let m = columns[0].len();
    Ok((0..m)
        .map(|i| (0..d).map(|j| columns[j][i]).collect())
        .collect())
}

/// Weighted innovation sums `g_i = Σ_t a_{t-1}^{(i)} h_t` over `(ω, μ_λ, ρ)` with
/// weights `a_{t-1}^{(i)} = (1-ω) P_t / J_t² · ∂h_t/∂θ_i` and `P_t = (1-ω) C_{t|t-1}`.
///
/// `filtered_prev[t]` must hold `λ̂_{t-1|t-1}` (with `λ_0` first). The error
/// variances do not depend on the data and are regenerated from `params`.
///
/// These three sums are linearly dependent:
/// `(1-ω) g_ω = -ρ g_ρ - μ_λ/(1-ρ) g_μ` holds for any input, so `g = 0` does
/// not determine ω on its own. The fitting routine uses [`combined_ef`] instead.
pub fn ef_components(
    series: &CountSeries,
    filtered_prev: &[f64],
    spec: &ModelSpec,
) -> Result<EfSystem> {
    if filtered_prev.len() != series.len() {
        return Err(Error::InvalidInput(format!(
            "filtered_prev has {} values for {} counts",
            filtered_prev.len(),
            series.len()
        )));
    }
    let y = series.as_f64();
    let eval = |x: &[f64]| -> Result<Vec<f64>> {
        let p = &spec.params;
        let s = spec.with_params(Params::from_moments(x[0], x[2], x[1], p.sigma2(), p.a, p.c));
        weighted_innovation_sums(&y, filtered_prev, &s)
    };
    let x0 = [spec.params.omega, spec.params.mu(), spec.params.rho];
    let components = eval(&x0)?;
    let jacobian = numerical_jacobian(&x0, 1e-5, eval)?;
    Ok(EfSystem {
        components,
        jacobian,
    })
}

fn weighted_innovation_sums(
    y: &[f64],
    filtered_prev: &[f64],
    spec: &ModelSpec,
) -> Result<Vec<f64>> {
    let p = &spec.params;
    let (w, rho, mu, s2) = (p.omega, p.rho, p.mu(), p.sigma2());
    let v = vbar(spec);
    let q = 1.0 - w;
    let mut c_prev = 0.0;
    let mut g = vec![0.0; 3];
    for (t, (&yt, &lam)) in y.iter().zip(filtered_prev).enumerate() {
        let c_pred = rho * rho * c_prev + (1.0 - rho * rho) * s2;
        let j = q * q * c_pred + q * v;
        if !(j > 0.0) {
            return Err(Error::DegenerateWeight { index: t });
        }
        let pred = rho * lam + (1.0 - rho) * mu;
        let h = yt - q * pred;
        let weight = q * (q * c_pred) / (j * j);
        let dh = [pred, -q * (1.0 - rho), -q * (lam - mu)];
        for i in 0..3 {
            g[i] += weight * dh[i] * h;
        }
        let gain = if c_pred == 0.0 { 0.0 } else { q * c_pred / j };
        c_prev = (1.0 - gain * q) * c_pred;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::gkf_filter;
    use approx::assert_relative_eq;

    fn table1() -> ModelSpec {
        ModelSpec::new(
            CountFamily::Zmp,
            IntensityFamily::Gar1,
            Params::zmp(0.2, 0.8, 2.0, 4.0),
        )
        .unwrap()
    }

    #[test]
    fn layout_round_trip() {
        for (family, intensity, params) in [
            (
                CountFamily::Zmp,
                IntensityFamily::Gar1,
                Params::zmp(0.2, 0.8, 2.0, 4.0),
            ),
            (
                CountFamily::Zmp,
                IntensityFamily::Ear1,
                Params::zmp(0.3, 0.5, 0.5, 1.0),
            ),
            (
                CountFamily::Zmnb,
                IntensityFamily::Gar1,
                Params::zmnb(0.3, 0.8, 2.0, 1.0, 0.5, 1),
            ),
            (
                CountFamily::Zmnb,
                IntensityFamily::Ear1,
                Params::zmnb(0.1, 0.4, 0.5, 1.0, 0.7, 0),
            ),
        ] {
            let form = ModelForm::new(family, intensity, params.c);
            let x = form.theta(&params);
            assert_eq!(x.len(), form.dim());
            assert_eq!(form.names().len(), form.dim());
            let back = form.params(&x);
            assert_relative_eq!(back.beta, params.beta, max_relative = 1e-14);
            assert_relative_eq!(back.p, params.p, max_relative = 1e-14);
            assert_eq!(
                (back.omega, back.rho, back.a, back.c),
                (params.omega, params.rho, params.a, params.c)
            );
        }
    }

    #[test]
    fn innovation_derivatives_match_finite_differences() {
        for (family, params) in [
            (CountFamily::Zmp, Params::zmp(0.2, 0.8, 2.0, 4.0)),
            (CountFamily::Zmnb, Params::zmnb(0.3, 0.7, 2.0, 1.5, 0.5, 0)),
            (CountFamily::Zmnb, Params::zmnb(-0.1, 0.6, 3.0, 2.0, 0.4, 1)),
        ] {
            let prev = FilterState {
                lambda_filtered: 1.7,
                error_var: 0.3,
            };
            let x0 = [
                params.omega,
                params.mu(),
                params.rho,
                params.sigma2(),
                params.a,
            ];
            let terms_at = |x: &[f64; 5]| {
                let spec = ModelSpec {
                    family,
                    intensity: IntensityFamily::Gar1,
                    params: Params::from_moments(x[0], x[2], x[1], x[3], x[4], params.c),
                };
                innovation_terms(
                    &FilterConsts::new(&spec),
                    &vbar_gradient(family, &spec.params),
                    &prev,
                    4.0,
                )
            };
            let base = terms_at(&x0);
            let last = if family == CountFamily::Zmp { 4 } else { 5 };
            for i in 0..last {
                let eps = 1e-6;
                let (mut up, mut down) = (x0, x0);
                up[i] += eps;
                down[i] -= eps;
                let (tu, td) = (terms_at(&up), terms_at(&down));
                assert_relative_eq!(base.dh[i], (tu.h - td.h) / (2.0 * eps), epsilon = 1e-7);
                assert_relative_eq!(base.dj[i], (tu.j - td.j) / (2.0 * eps), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn golden_weighted_sums_on_three_steps() {
        let series = CountSeries::new(vec![3, 0, 5]);
        let spec = table1();
        let path = gkf_filter(&series, &spec).unwrap();
        let system = ef_components(&series, &path.lambda_prev(), &spec).unwrap();
        // Evaluated in exact rationals from the frozen filter trace.
        let expected = [
            0.27519053222591944,
            -0.02471511806077009,
            0.03374844353370671,
        ];
        for (g, e) in system.components.iter().zip(expected) {
            assert_relative_eq!(*g, e, max_relative = 1e-13);
        }
    }

    #[test]
    fn weighted_sums_are_linearly_dependent() {
        let series = CountSeries::new(vec![3, 0, 5, 2, 0, 1, 4, 0, 0, 2]);
        let spec = table1();
        let path = gkf_filter(&series, &spec).unwrap();
        let g = ef_components(&series, &path.lambda_prev(), &spec)
            .unwrap()
            .components;
        let (w, rho, mu) = (0.2, 0.8, 2.0);
        assert_relative_eq!(
            (1.0 - w) * g[0],
            -rho * g[2] - mu / (1.0 - rho) * g[1],
            epsilon = 1e-12
        );
    }

    #[test]
    fn omega_root_without_dependence() {
        let series = CountSeries::new(vec![3, 0, 5, 2, 0, 1, 4]);
        let ybar = 15.0 / 7.0;
        let mu = 2.0;
        let omega = 1.0 - ybar / mu;
        let spec = ModelSpec::new(
            CountFamily::Zmp,
            IntensityFamily::Gar1,
            Params::zmp(omega, 0.0, 2.0, 4.0),
        )
        .unwrap();
        let prev = vec![mu; 7];
        let g = ef_components(&series, &prev, &spec).unwrap().components;
        assert!(g[0].abs() < 1e-12);
    }

    #[test]
    fn rejects_misaligned_input() {
        let series = CountSeries::new(vec![1, 2, 3]);
        assert!(ef_components(&series, &[1.0, 2.0], &table1()).is_err());
    }
}
