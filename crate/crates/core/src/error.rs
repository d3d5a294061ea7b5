use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("capacity exceeded: {requested} qubits requested, limit is {limit}")]
    Capacity { requested: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator is not Hermitian: {0}")]
    NotHermitian(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("estimator mode mismatch: expected {expected}")]
    ModeMismatch { expected: &'static str },

    #[error("bound not applicable: {0}")]
    BoundInapplicable(String),

    #[error("degenerate spectrum: {0}")]
    Degenerate(String),

    #[error("density grid too coarse: normalization drifted by {drift:.3e}")]
    GridTooCoarse { drift: f64 },

    #[error("sampling budget exhausted after {shots} shots")]
    BudgetExhausted { shots: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
