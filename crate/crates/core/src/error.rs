use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across data ingestion, tree handling, optimization and
/// artifact I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at row {row}: {message}")]
    Csv { row: u64, message: String },

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    NonNumeric { row: u64, column: usize, value: String },

    #[error("row {row}: missing value in column {column}")]
    MissingValue { row: u64, column: usize },

    #[error("empty dataset: {0}")]
    Empty(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("series of length {len} too short for {lags} lags and horizon {horizon}")]
    SeriesTooShort { len: usize, lags: usize, horizon: usize },

    #[error("feature index {index} out of range for a row of {len} features")]
    FeatureOutOfRange { index: usize, len: usize },

    #[error("parameter vector has {got} values, tree has {expected} slots")]
    ParamLength { expected: usize, got: usize },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("evaluation budget exceeded: used {used}, budget {budget}")]
    BudgetExceeded { used: u64, budget: u64 },

    #[error("corrupt artifact {path}: {message}")]
    Artifact { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn artifact(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Artifact {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
