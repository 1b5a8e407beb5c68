use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad arguments or configuration.
    Usage,
    /// Unreadable, malformed or inconsistent data.
    Data,
    /// A numerical routine failed.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("no feature columns left after filtering")]
    NoFeatures,

    #[error("column `{0}` has zero variance over the fitting rows")]
    ZeroVariance(String),

    #[error("column mismatch: {0}")]
    ColumnMismatch(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("too few rows: need at least {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("only one class present in {0}")]
    SingleClass(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid hyperparameter for {kind}: {message}")]
    Hyperparameter { kind: String, message: String },

    #[error("matrix is not positive definite after regularisation up to {max_jitter:e}")]
    NotPositiveDefinite { max_jitter: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("resampling failed: {0}")]
    Resample(String),

    #[error("model file format version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u16, found: u16 },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("unknown learner kind `{0}`")]
    UnknownKind(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidArgument(_) | Error::Hyperparameter { .. } => ErrorCategory::Usage,
            Error::NotPositiveDefinite { .. } | Error::Singular(_) => ErrorCategory::Numeric,
            _ => ErrorCategory::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
