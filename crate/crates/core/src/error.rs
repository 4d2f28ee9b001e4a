use thiserror::Error;

/// Errors raised by the simulation and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel singularity at x = 0 for alpha = {alpha}")]
    Singularity { alpha: f64 },

    #[error("length error: {0}")]
    Length(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("covariance matrix is not positive definite (pivot {pivot} = {value:e})")]
    CholeskyFailure { pivot: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Errors caused by the numerical routines themselves rather than by the
    /// shape of the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CholeskyFailure { .. } | Error::Degenerate(_) | Error::Singularity { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
