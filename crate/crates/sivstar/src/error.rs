use crate::model::ValidationReport;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Model construction rejected; the report lists every violation found.
    #[error("invalid model: {}", .0.errors.join("; "))]
    InvalidModel(ValidationReport),

    #[error("integration failure at t = {time}: {detail} (try a smaller step)")]
    IntegrationFailure { time: f64, detail: String },

    /// The vigilant class has an absorbing state (or is numerically close to
    /// one), so the disease-free equilibrium is not defined.
    #[error("vigilant equilibrium undefined: {0}")]
    EquilibriumUndefined(String),

    #[error("no convergence after {iterations} iterations (last estimate {estimate})")]
    NonConvergence { estimate: f64, iterations: usize },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
