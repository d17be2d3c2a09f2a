use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("station {station_id}: non-finite value at sample {index}")]
    NonFinite { station_id: u64, index: usize },

    #[error("unknown label {given:?}; valid labels are {valid}")]
    UnknownLabel { given: String, valid: String },

    #[error("non-finite sample {0}")]
    NonFiniteSample(f64),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("empty input")]
    Empty,

    #[error("station frozen")]
    Frozen,

    #[error("index {index} out of range for series of length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("zero variance")]
    ZeroVariance,

    #[error("series too short: need more than {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("partial autocorrelation recursion degenerate at lag {lag}")]
    DegenerateRecursion { lag: usize },

    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training needs at least 2 classes, found {0}")]
    SingleClass(usize),

    #[error("smo did not converge for class pair ({0}, {1})")]
    NoConvergence(String, String),

    #[error("diverged; lower learning rate")]
    Diverged,

    #[error("class {label} has {count} sample(s); stratified split needs at least 2")]
    TooFewSamples { label: String, count: usize },

    #[error("band excludes all valid paths")]
    BandTooNarrow,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error after peeling off context layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
