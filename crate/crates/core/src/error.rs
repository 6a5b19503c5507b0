use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("line {line}: non-positive price {price}")]
    NonPositivePrice { line: u64, price: f64 },

    #[error("line {line}: timestamp {timestamp} is not after the previous row")]
    OutOfOrderTimestamp { line: u64, timestamp: String },

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("input has zero variance")]
    ZeroVariance,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("design matrix is rank deficient")]
    SingularDesign,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{x} lies outside the distribution support")]
    OutsideSupport { x: f64 },

    #[error("need at least {needed} exceedances, got {got}")]
    InsufficientExceedances { needed: usize, got: usize },

    #[error("tail probability {p0} is above the exceedance rate {rate}")]
    QuantileNotInTail { p0: f64, rate: f64 },

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("non-positive variance forecast {0}")]
    NonPositiveVariance(f64),

    #[error("date misalignment: {0}")]
    DateMisalignment(String),

    #[error("violation series is degenerate (all zeros or all ones)")]
    DegenerateSeries,

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("model {spec}: {source}")]
    Spec {
        spec: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing input {}", .0.display())]
    MissingInput(PathBuf),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tag an error with the model spec that produced it.
    pub fn for_spec(self, spec: impl Into<String>) -> Self {
        match self {
            e @ Error::Spec { .. } => e,
            e => Error::Spec {
                spec: spec.into(),
                source: Box::new(e),
            },
        }
    }

    /// True for errors caused by invalid configuration or input validation
    /// rather than by a failed computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Spec { source, .. } => source.is_validation(),
            e => matches!(
                e,
                Error::Config(_) | Error::InvalidSplit(_) | Error::MissingInput(_)
            ),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
