//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv row {row}, column {column:?}: {message}")]
    Cell {
        /// 1-based data row (header excluded).
        row: usize,
        column: String,
        message: String,
    },

    #[error("unknown column {0:?} in header")]
    UnknownColumn(String),

    #[error("missing required column {0:?}")]
    MissingColumn(String),

    #[error("duplicate column {0:?} in header")]
    DuplicateColumn(String),

    #[error("cohort is empty")]
    EmptyCohort,

    #[error("labels contain a single class; both outcomes are required")]
    SingleClass,

    #[error("record {index} does not conform to the schema: {details}")]
    InvalidRecord { index: usize, details: String },

    #[error("column {column:?} has no observed value among the fitted rows")]
    AllMissingColumn { column: String },

    #[error("matrix layout mismatch: expected {expected} columns, got {got}")]
    LayoutMismatch { expected: usize, got: usize },

    #[error("aligned vectors differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("k = {k} exceeds the number of training rows ({n})")]
    KTooLarge { k: usize, n: usize },

    #[error("design column {feature:?} is degenerate; least squares is rank-deficient")]
    RankDeficient { feature: String },

    #[error("feature {0:?} is not part of the schema")]
    UnknownFeature(String),

    #[error("unknown model kind {got:?}; supported kinds: {supported}")]
    UnknownModelKind { got: String, supported: String },

    #[error("model kind {kind} does not support {operation}")]
    Unsupported { kind: String, operation: String },

    #[error("bundle format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("repetition {repetition}: {source}")]
    Repetition {
        repetition: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Corrupt { path: path.into(), reason: reason.into() }
    }

    pub fn in_repetition(self, repetition: usize) -> Self {
        Error::Repetition { repetition, source: Box::new(self) }
    }
}
