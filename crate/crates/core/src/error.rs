//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}, column {col}: {reason}")]
    MalformedRow { row: usize, col: usize, reason: String },
    #[error("row {row}: expected exactly one fault flag set, found {n_set}")]
    AmbiguousOneHot { row: usize, n_set: usize },
    #[error("row {row}: expected exactly one steel indicator set, found {n_set}")]
    AmbiguousSteel { row: usize, n_set: usize },
    #[error("unknown format tag {0:?} (expected \"raw\" or \"cleaned\")")]
    UnknownFormat(String),
    #[error("table is empty")]
    EmptyTable,
    #[error("class {label} has {n} rows, need at least {needed}")]
    ClassTooSmall { label: String, n: usize, needed: usize },
    #[error("k = {k} out of range (must be in 1..{max})")]
    KOutOfRange { k: usize, max: usize },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("unknown fault label {0:?}")]
    UnknownLabel(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unsatisfiable condition: {0}")]
    UnsatisfiableCondition(String),
    #[error("class counts sum to zero")]
    ZeroSumCounts,
    #[error("table has a single class; at least two are required")]
    SingleClass,
    #[error("rule covers no rows")]
    EmptyCoverage,
    #[error("model file {path}: {reason}")]
    BadModel { path: String, reason: String },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
