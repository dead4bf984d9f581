use thiserror::Error;

/// Errors raised by the delaykit evaluators and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "series truncation did not reach tolerance {tol:e} within {k_max} terms \
         (achieved tail bound {achieved:e})"
    )]
    Truncation {
        tol: f64,
        k_max: usize,
        achieved: f64,
    },

    #[error("numeric range exceeded: {0}")]
    NumericRange(String),

    #[error("integration diverged at t = {t} (|u| = {magnitude:e}); use a smaller step")]
    Diverged { t: f64, magnitude: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
