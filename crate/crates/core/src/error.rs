use thiserror::Error;

pub type Result<T> = std::result::Result<T, HgError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HgError {
    #[error("index {eps} is below the optimal index {eps0}: the weighted integral diverges")]
    IndexTooSmall { eps: f64, eps0: f64 },

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("time {t} lies beyond the maximal existence time {t_max}")]
    BeyondMaximalTime { t: f64, t_max: f64 },

    #[error("time {t} is the maximal existence time; the limit there is a classification question")]
    AtMaximalTime { t: f64 },

    #[error("dimension {dim} is not supported for {what}")]
    DimensionUnsupported { dim: usize, what: String },

    #[error("derivative order |alpha| + 2m = {order} exceeds the supported maximum {max}")]
    OrderUnsupported { order: usize, max: usize },

    #[error("operation requires nonnegative data")]
    SignedDataUnsupported,

    #[error("measure is not of the factored form e^(A|x|^2) v(x): {0}")]
    NotFactored(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("only {usable} usable shells (need at least {needed})")]
    InsufficientShells { usable: usize, needed: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("coefficient {k} = {value} violates the envelope C k! tau^-k = {bound}")]
    InconsistentBound { k: usize, value: f64, bound: f64 },

    #[error("series tail cannot be certified at x = {x}, t = {t} within {truncation} terms")]
    TailNotClosed { x: f64, t: f64, truncation: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for HgError {
    fn from(e: std::io::Error) -> Self {
        HgError::Io(e.to_string())
    }
}
