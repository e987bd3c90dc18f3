use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix must have dimension at least 1")]
    EmptyMatrix,

    #[error("matrix is not symmetric: |S({row},{col}) - S({col},{row})| = {gap:e} exceeds {tolerance:e}")]
    NotSymmetric {
        row: usize,
        col: usize,
        gap: f64,
        tolerance: f64,
    },

    #[error("matrix is not positive semi-definite: minimum eigenvalue {min_eigenvalue:e} (largest {max_eigenvalue:e})")]
    NotPositiveSemiDefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error(
        "matrix is singular: minimum eigenvalue {min_eigenvalue:e} (largest {max_eigenvalue:e})"
    )]
    Singular {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("zero or negative variance {value:e} at index {index}")]
    DegenerateVariance { index: usize, value: f64 },

    #[error("target condition number {kappa_max} must be greater than 1")]
    InvalidTarget { kappa_max: f64 },

    #[error(
        "target condition number {kappa_max} is not below the current condition number {current}"
    )]
    NoOpRequest { kappa_max: f64, current: String },

    #[error("matrix has a single repeated eigenvalue and cannot be reconditioned")]
    AlreadyOptimal,

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("need at least 2 samples, found {found}")]
    InsufficientSamples { found: usize },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for I/O and parse failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Io { .. } => 2,
            _ => 1,
        }
    }
}
