use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    Empty,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("truncation bound must be positive, got {0}")]
    NonPositiveBound(f64),

    /// The appended column lies (numerically) in the span of the current basis.
    #[error("column is numerically dependent on the selected atoms (orthogonal norm {0:e})")]
    Degenerate(f64),

    #[error("triangular factor is singular at pivot {0}")]
    SingularFactor(usize),

    #[error("invalid range: low {low} must be below high {high}")]
    BadRange { low: f64, high: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("all dictionary centers coincide")]
    DegenerateCenters,

    #[error("residual is zero")]
    ZeroResidual,

    #[error("atom index {index} out of range for dictionary of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("ridge system is not positive definite")]
    FactorizationFailure,

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("target column {0} not found")]
    MissingTarget(String),

    #[error("file {0} contains no data rows")]
    EmptyFile(PathBuf),

    #[error("result table is empty")]
    EmptyTable,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
