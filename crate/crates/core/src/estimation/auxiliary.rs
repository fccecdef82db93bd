//! Stand-alone estimators for σ²_λ and the NB dispersion on a fixed filtered path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilteredPath;
use crate::observation::{
    conditional_moments, quadratic_innovation_variance, CountFamily, CountSeries, ModelSpec, Params,
};

/// Smallest dispersion considered; also the value reported for a boundary root.
pub const A_FLOOR: f64 = 1e-4;

/// `(1/(n-1)) Σ_{t>=2} (λ̂_t - ρλ̂_{t-1} - (1-ρ)μ)² / (1-ρ²)`.
///
/// Consistent when applied to the latent path itself. On filtered values it
/// is biased low because filtering removes the error variance `C_t`; see
/// [`estimate_sigma2_corrected`].
pub fn estimate_sigma2(filtered: &[f64], rho: f64, mu: f64) -> Result<f64> {
    if filtered.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two filtered values".into(),
        ));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidInput(format!(
            "|rho| must be below 1, got {rho}"
        )));
    }
    let sum: f64 = filtered
        .windows(2)
        .map(|w| {
            let e = w[1] - rho * w[0] - (1.0 - rho) * mu;
            e * e
        })
        .sum();
    Ok(sum / ((filtered.len() - 1) as f64 * (1.0 - rho * rho)))
}

/// [`estimate_sigma2`] with the filter error variance added back:
/// each squared residual is increased by `C_t - ρ² C_{t-1}`.
pub fn estimate_sigma2_corrected(path: &FilteredPath, rho: f64, mu: f64) -> Result<f64> {
    let lambda = path.lambda();
    let plain = estimate_sigma2(&lambda, rho, mu)?;
    let correction: f64 = path
        .states
        .windows(2)
        .map(|w| w[1].error_var - rho * rho * w[0].error_var)
        .sum();
    Ok(plain + correction / ((lambda.len() - 1) as f64 * (1.0 - rho * rho)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticEfRoot {
    pub a: f64,
    /// The function was already non-negative at [`A_FLOOR`], so the root lies
    /// at the lower boundary.
    pub boundary: bool,
}

/// `g_Q(a) = Σ_t -(1-ω) λ̂_t^{1+c} / Var(h^Q_t) · h^Q_t` with
/// `h^Q_t = (y_t - (1-ω)λ̂_t)² - Var(Y_t | λ̂_t)`.
pub fn quadratic_ef(series: &CountSeries, filtered: &[f64], params: &Params) -> Result<f64> {
    let mut g = 0.0;
    for (t, (&y, &lam)) in series.counts.iter().zip(filtered).enumerate() {
        let (mean, var) = conditional_moments(CountFamily::Zmnb, lam, params);
        let var_q = quadratic_innovation_variance(CountFamily::Zmnb, lam, params);
        if !(var_q > 0.0) {
            return Err(Error::DegenerateWeight { index: t });
        }
        let e = y as f64 - mean;
        let hq = e * e - var;
        g -= (1.0 - params.omega) * lam * lam.powi(params.c as i32) * hq / var_q;
    }
    Ok(g)
}

/// Root of [`quadratic_ef`] in `a` on `[A_FLOOR, a_max]`, holding the other
/// parameters and the filtered path fixed. Uses the Illinois variant of regula
/// falsi, which keeps the bracket.
pub fn solve_quadratic_ef(
    series: &CountSeries,
    filtered: &[f64],
    spec: &ModelSpec,
    a_max: f64,
) -> Result<QuadraticEfRoot> {
    if spec.family != CountFamily::Zmnb {
        return Err(Error::InvalidSpec(
            "the dispersion equation applies to ZMNB models only".into(),
        ));
    }
    if filtered.len() != series.len() {
        return Err(Error::InvalidInput(
            "filtered path and series differ in length".into(),
        ));
    }
    let g = |a: f64| quadratic_ef(series, filtered, &Params { a, ..spec.params });
    let (mut lo, mut hi) = (A_FLOOR, a_max);
    let (mut g_lo, mut g_hi) = (g(lo)?, g(hi)?);
    if g_lo >= 0.0 {
        return Ok(QuadraticEfRoot {
            a: A_FLOOR,
            boundary: true,
        });
    }
    if g_hi < 0.0 {
        return Err(Error::NoSignChange { a_max });
    }
    let mut side = 0;
    for _ in 0..200 {
        let mid = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        let g_mid = g(mid)?;
        if g_mid == 0.0 || (hi - lo) < 1e-12 * hi {
            return Ok(QuadraticEfRoot {
                a: mid,
                boundary: false,
            });
        }
        if g_mid < 0.0 {
            lo = mid;
            g_lo = g_mid;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            g_hi = g_mid;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(QuadraticEfRoot {
        a: 0.5 * (lo + hi),
        boundary: false,
    })
}
