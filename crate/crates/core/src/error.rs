use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    /// ω falls outside `[-P0/(1-P0), 1]` for the intensity in question.
    #[error(
        "infeasible zero-modification parameter omega={omega} at lambda={lambda}{}: {bound} bound is {limit}",
        index.map(|t| format!(" (t={t})")).unwrap_or_default()
    )]
    InfeasibleOmega {
        omega: f64,
        lambda: f64,
        limit: f64,
        bound: &'static str,
        index: Option<usize>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("series is constant; autocorrelation is undefined")]
    ConstantSeries,

    #[error("degenerate estimating-function weight at t={index}")]
    DegenerateWeight { index: usize },

    #[error("zero conditional variance at t={index}")]
    ZeroVariance { index: usize },

    #[error(
        "no sign change of the dispersion estimating function on (0, {a_max}]; increase a_max"
    )]
    NoSignChange { a_max: f64 },

    #[error("infeasible initial values: {0}")]
    InfeasibleInit(String),

    #[error("grid search found no feasible point")]
    EmptyGrid,

    #[error("{failed} of {total} refits failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
