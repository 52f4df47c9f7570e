use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid hyper-parameter: {0}")]
    InvalidHyperParameter(String),

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("hyper-parameter theta must be strictly positive (component {0})")]
    NonPositiveTheta(usize),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("normal equations are singular (common kernel condition violated)")]
    SingularSystem,

    #[error("non-finite value encountered in {0}")]
    NonFiniteValue(&'static str),

    #[error("no positive root of the stationarity equation (s = {s}, r = {r}, eta = {eta})")]
    NoPositiveRoot { s: f64, r: f64, eta: f64 },

    #[error("eta = {eta} has the wrong sign for r = {r}")]
    InvalidEta { r: f64, eta: f64 },

    #[error("gamma shape L/2 - 1 + beta = {0} must be positive")]
    InvalidShape(f64),

    #[error("reference signal is identically zero")]
    ZeroTruth,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
