//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or parameter dimensions disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument is outside its valid domain (e.g. a zero pooling factor).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Configuration file or override could not be interpreted.
    #[error("config error: {0}")]
    Config(String),

    /// Input data is malformed. `row` and `col` are 1-based file coordinates
    /// (row 1 is the header).
    #[error("data error in {path} at row {row}, column {col}: {message}")]
    DataCell {
        path: PathBuf,
        row: usize,
        col: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    /// A NaN or infinity surfaced during computation.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A metric is mathematically undefined for the given inputs.
    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numerical, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::DataCell { .. } | Error::Data(_) | Error::Csv(_) | Error::Shape(_) => 3,
            Error::NonFinite(_) | Error::MetricUndefined(_) => 4,
            Error::Checkpoint(_) | Error::Json(_) | Error::Io(_) => 1,
        }
    }
}
