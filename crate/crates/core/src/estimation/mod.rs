//! Estimating-function estimation of the model parameters.

mod auxiliary;
mod bootstrap;
mod ef;
mod init;
mod solver;

pub use auxiliary::{
    estimate_sigma2, estimate_sigma2_corrected, quadratic_ef, solve_quadratic_ef, QuadraticEfRoot,
    A_FLOOR,
};
pub use bootstrap::{
    bootstrap_se, bootstrap_se_from_keys, simulate_series, BootstrapSummary, ParamsSe,
};
pub use ef::{ef_components, EfSystem, ModelForm};
pub use init::{
    grid_search, grid_search_init, grid_search_moments, grid_starts, moment_init_ear1,
    moment_init_gar1_factorial, moment_objective, GridAxis, GridChoice, GridConfig, SampleMoments,
};
pub use solver::{
    fit, initial_values, innovation_objective, solve_ef_block, FitOptions, FitResult, InitStrategy,
    TraceEntry,
};

/// Combined estimating function per observation at `params`, in the order of
/// [`ModelForm::names`]. Zero at the estimate.
pub fn combined_ef_values(
    series: &crate::observation::CountSeries,
    spec: &crate::observation::ModelSpec,
) -> crate::error::Result<Vec<f64>> {
    let form = ModelForm::of(spec);
    let x = form.theta(&spec.params);
    ef::combined_ef(&series.as_f64(), &form, &x, crate::filter::DEFAULT_CLAMP).map(|e| e.values)
}
