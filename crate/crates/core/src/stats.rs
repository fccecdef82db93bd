//! Small descriptive-statistics helpers shared by the estimation and
//! diagnostics modules.

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Lag-`k` sample autocorrelation with the biased (`1/n`) autocovariance.
/// Returns NaN for a constant series.
pub fn sample_acf_at(x: &[f64], k: usize) -> f64 {
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if k >= x.len() {
        return 0.0;
    }
    let num: f64 = x.iter().zip(&x[k..]).map(|(a, b)| (a - m) * (b - m)).sum();
    num / denom
}

/// Sample ACF for lags `0..=max_lag`.
pub fn sample_acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (0..=max_lag)
        .map(|k| {
            if k >= x.len() {
                return 0.0;
            }
            x.iter()
                .zip(&x[k..])
                .map(|(a, b)| (a - m) * (b - m))
                .sum::<f64>()
                / denom
        })
        .collect()
}

/// Partial autocorrelations for lags `1..=max_lag` from an ACF (index 0 = lag 0)
/// via the Durbin-Levinson recursion.
pub fn durbin_levinson(acf: &[f64], max_lag: usize) -> Vec<f64> {
    let mut pacf = Vec::with_capacity(max_lag);
    let mut phi = vec![0.0; max_lag + 1];
    let mut prev = vec![0.0; max_lag + 1];
    let mut v = 1.0;
    for k in 1..=max_lag {
        let num = acf[k] - (1..k).map(|j| prev[j] * acf[k - j]).sum::<f64>();
        let a = if v > 0.0 { num / v } else { 0.0 };
        phi[k] = a;
        for j in 1..k {
            phi[j] = prev[j] - a * prev[k - j];
        }
        v *= 1.0 - a * a;
        pacf.push(a);
        prev[..=k].copy_from_slice(&phi[..=k]);
    }
    pacf
}
