use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("target column {0:?} not found")]
    MissingTarget(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("feature {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0} is not supported for this task")]
    Unsupported(String),

    #[error("quadratic program diverged: objective became {0}")]
    QpNonFinite(f64),

    #[error("linear program: {0}")]
    Lp(String),

    #[error("gradient training diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}
