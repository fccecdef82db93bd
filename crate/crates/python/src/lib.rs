//! Python bindings: model specification, simulation, filtering, fitting and
//! diagnostics over plain lists of counts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use zmcount::diagnostics;
use zmcount::estimation::{self, FitOptions, InitStrategy, ModelForm};
use zmcount::filter::gkf_filter;
use zmcount::intensity::{simulate_intensity, IntensityFamily};
use zmcount::observation::{self, CountFamily, CountSeries, ModelSpec};
use zmcount::rng::seeded;
use zmcount::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidSpec(_)
        | Error::InvalidInput(_)
        | Error::InfeasibleOmega { .. }
        | Error::ConstantSeries => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} {s:?}")))
}

/// Model parameters: zero modification `omega`, intensity autocorrelation
/// `rho`, gamma rate `beta` and shape `p`, NB dispersion `a` and form `c`.
#[pyclass(name = "Params", from_py_object)]
#[derive(Clone, Copy)]
struct PyParams {
    #[pyo3(get, set)]
    omega: f64,
    #[pyo3(get, set)]
    rho: f64,
    #[pyo3(get, set)]
    beta: f64,
    #[pyo3(get, set)]
    p: f64,
    #[pyo3(get, set)]
    a: f64,
    #[pyo3(get, set)]
    c: u8,
}

impl From<observation::Params> for PyParams {
    fn from(p: observation::Params) -> Self {
        Self {
            omega: p.omega,
            rho: p.rho,
            beta: p.beta,
            p: p.p,
            a: p.a,
            c: p.c,
        }
    }
}

impl From<PyParams> for observation::Params {
    fn from(p: PyParams) -> Self {
        observation::Params::zmnb(p.omega, p.rho, p.beta, p.p, p.a, p.c)
    }
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (omega, rho, beta, p, a = 0.0, c = 0))]
    fn new(omega: f64, rho: f64, beta: f64, p: f64, a: f64, c: u8) -> Self {
        Self {
            omega,
            rho,
            beta,
            p,
            a,
            c,
        }
    }

    /// Stationary intensity mean `p/beta`.
    #[getter]
    fn mu(&self) -> f64 {
        observation::Params::from(*self).mu()
    }

    /// Stationary intensity variance `p/beta^2`.
    #[getter]
    fn sigma2(&self) -> f64 {
        observation::Params::from(*self).sigma2()
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(omega={}, rho={}, beta={}, p={}, a={}, c={})",
            self.omega, self.rho, self.beta, self.p, self.a, self.c
        )
    }
}

/// A fully specified model: count family (`"zmp"` or `"zmnb"`), intensity
/// family (`"gar1"` or `"ear1"`) and parameters.
#[pyclass(name = "Model")]
struct PyModel {
    spec: ModelSpec,
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(family: &str, intensity: &str, params: PyParams) -> PyResult<Self> {
        let family: CountFamily = parse("family", family)?;
        let intensity: IntensityFamily = parse("intensity", intensity)?;
        let spec = ModelSpec::new(family, intensity, params.into()).map_err(to_py)?;
        Ok(Self { spec })
    }

    #[getter]
    fn params(&self) -> PyParams {
        self.spec.params.into()
    }

    /// Returns `(counts, intensities)` of length `n`.
    fn simulate(&self, n: usize, seed: u64) -> PyResult<(Vec<u64>, Vec<f64>)> {
        let mut rng = seeded(seed);
        let lambda = simulate_intensity(&self.spec.intensity_spec(), n, &mut rng).map_err(to_py)?;
        let series = observation::zm_sample(self.spec.family, &lambda, &self.spec.params, &mut rng)
            .map_err(to_py)?;
        Ok((series.counts, lambda.0))
    }

    /// Runs the generalized Kalman filter. Returns a dict of per-step lists:
    /// `lambda`, `error_var`, `prediction`, `innovation`, `innovation_var`, `gain`.
    fn filter<'py>(
        &self,
        py: Python<'py>,
        counts: Vec<u64>,
    ) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
        let path = gkf_filter(&CountSeries::new(counts), &self.spec).map_err(to_py)?;
        let out = pyo3::types::PyDict::new(py);
        out.set_item("lambda", path.lambda())?;
        out.set_item(
            "error_var",
            path.states.iter().map(|s| s.error_var).collect::<Vec<_>>(),
        )?;
        out.set_item(
            "prediction",
            path.steps.iter().map(|s| s.prediction).collect::<Vec<_>>(),
        )?;
        out.set_item("innovation", path.innovations())?;
        out.set_item(
            "innovation_var",
            path.steps
                .iter()
                .map(|s| s.innovation_var)
                .collect::<Vec<_>>(),
        )?;
        out.set_item(
            "gain",
            path.steps.iter().map(|s| s.gain).collect::<Vec<_>>(),
        )?;
        Ok(out)
    }

    /// `P(Y = k | lambda)`.
    fn pmf(&self, k: u64, lam: f64) -> PyResult<f64> {
        observation::zm_pmf(self.spec.family, k, lam, &self.spec.params).map_err(to_py)
    }

    /// Conditional `(mean, variance)` of `Y` given `lambda`.
    fn conditional_moments(&self, lam: f64) -> (f64, f64) {
        observation::conditional_moments(self.spec.family, lam, &self.spec.params)
    }

    /// Marginal `P(Y = k)` for `k = 0..=kmax`; ZMNB is marginalized by Monte Carlo.
    #[pyo3(signature = (kmax, seed = 0, mc_draws = diagnostics::DEFAULT_MC_DRAWS))]
    fn marginal_probs(&self, kmax: u64, seed: u64, mc_draws: usize) -> PyResult<Vec<f64>> {
        let fitted =
            diagnostics::fitted_marginal_probs(&self.spec, kmax, mc_draws, &mut seeded(seed))
                .map_err(to_py)?;
        Ok(fitted.probs)
    }

    /// Pearson residuals of `counts` at this model's filtered intensities.
    fn pearson_residuals(&self, counts: Vec<u64>) -> PyResult<Vec<f64>> {
        let series = CountSeries::new(counts);
        let path = gkf_filter(&series, &self.spec).map_err(to_py)?;
        Ok(
            diagnostics::pearson_residuals(&series, &path.lambda(), &self.spec)
                .map_err(to_py)?
                .values,
        )
    }

    fn __repr__(&self) -> String {
        format!(
            "Model({:?}, {:?}, {})",
            self.spec.family,
            self.spec.intensity,
            PyParams::from(self.spec.params).__repr__()
        )
    }
}

/// Outcome of an estimating-function fit.
#[pyclass(name = "FitResult")]
struct PyFitResult {
    inner: estimation::FitResult,
}

#[pymethods]
impl PyFitResult {
    #[getter]
    fn params(&self) -> PyParams {
        self.inner.params_hat.into()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn ef_norm(&self) -> f64 {
        self.inner.ef_norm
    }

    #[getter]
    fn boundary(&self) -> Vec<String> {
        self.inner.boundary.clone()
    }

    #[getter]
    fn filtered(&self) -> Vec<f64> {
        self.inner.filtered.clone()
    }

    #[getter]
    fn residuals(&self) -> Vec<f64> {
        self.inner.residuals.clone()
    }

    /// The fitted model.
    fn model(&self) -> PyModel {
        PyModel {
            spec: self.inner.spec(),
        }
    }

    /// Full result as JSON, the same document the command-line fit writes.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(converged={}, {})",
            self.inner.converged,
            PyParams::from(self.inner.params_hat).__repr__()
        )
    }
}

/// Fits a model to `counts`. `start` fixes the starting point; by default
/// several starts are solved and the best root kept.
#[pyfunction]
#[pyo3(signature = (counts, family = "zmp", intensity = "gar1", c = 0, tol = 1e-6, start = None))]
fn fit(
    py: Python<'_>,
    counts: Vec<u64>,
    family: &str,
    intensity: &str,
    c: u8,
    tol: f64,
    start: Option<PyParams>,
) -> PyResult<PyFitResult> {
    let form = ModelForm::new(parse("family", family)?, parse("intensity", intensity)?, c);
    let mut options = FitOptions {
        tol,
        ..FitOptions::default()
    };
    if let Some(p) = start {
        options.init = InitStrategy::Fixed { params: p.into() };
    }
    let series = CountSeries::new(counts);
    let inner = py
        .detach(|| estimation::fit(&series, &form, &options))
        .map_err(to_py)?;
    Ok(PyFitResult { inner })
}

/// Ljung-Box portmanteau test over lags `1..=lags`; returns `(statistic, p_value)`.
#[pyfunction]
fn ljung_box(x: Vec<f64>, lags: usize) -> PyResult<(f64, f64)> {
    let lb = diagnostics::ljung_box(&x, lags).map_err(to_py)?;
    Ok((lb.statistic, lb.p_value))
}

/// Sample autocorrelations and partial autocorrelations at lags `1..=max_lag`.
#[pyfunction]
fn acf_pacf(x: Vec<f64>, max_lag: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    diagnostics::sample_acf_pacf(&x, max_lag).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "zmcount")]
pub fn zmcount_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyFitResult>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(ljung_box, m)?)?;
    m.add_function(wrap_pyfunction!(acf_pacf, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
