use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("degenerate system: {0}")]
    DegenerateSystem(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("did not converge after {iterations} iterations: {message} (last residual {residual:e})")]
    Convergence {
        message: String,
        iterations: usize,
        residual: f64,
    },
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("calibration error: {0}")]
    Calibration(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dataset(msg: impl Into<String>) -> Self {
        Error::Dataset(msg.into())
    }
}
