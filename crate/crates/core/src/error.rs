use thiserror::Error;

/// Errors produced across the receiver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("SVD did not converge after {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("TLS solution does not exist: trailing block of right singular vectors is singular (smallest/largest singular value ratio {ratio:e})")]
    TlsNoSolution { ratio: f64 },

    #[error("model is not trained")]
    Untrained,

    #[error("degenerate regressor matrix (condition number of R^T R = {condition:e})")]
    DegenerateRegressor { condition: f64 },

    #[error("signal power is zero; SNR is undefined")]
    ZeroSignalPower,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
