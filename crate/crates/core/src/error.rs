use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },
    #[error("fields live on incompatible grids")]
    GridMismatch,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("invalid optics parameter: {0}")]
    InvalidParameter(String),
    #[error("virtual input {value} at column {column} outside [0, 1]")]
    InputOutOfRange { column: usize, value: f64 },
    #[error("pattern has {got} columns, expected {expected}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InputMapError {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("virtual input {value} at column {column} outside [0, 1]")]
    InputOutOfRange { column: usize, value: f64 },
    #[error("monotonic repair failed for LUT entries {entries:?}")]
    MonotonicRepair { entries: Vec<usize> },
    #[error("column {column} does not match any LUT entry")]
    NotInvertible { column: usize },
    #[error("pattern has {got} rows, LUT expects {expected}")]
    RowMismatch { expected: usize, got: usize },
    #[error("malformed LUT: {0}")]
    Malformed(String),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CondensateError {
    #[error("invalid condensate parameter: {0}")]
    InvalidParameter(String),
    #[error("negative density {value} at sample {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error("imaginary-time evolution produced NaN at step {step}")]
    NotANumber { step: usize },
    #[error("no chemical-potential bracket normalizes the Thomas-Fermi density")]
    NoBracket,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IlcError {
    #[error("regularization must be positive, got {0}")]
    InvalidRegularization(f64),
    #[error("gain support is empty: no point with both optical contribution and occupation")]
    EmptySupport,
    #[error("negative density {value} at sample {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("ground state did not converge at iteration {iteration} after {steps} steps")]
    NotConverged { iteration: usize, steps: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    InputMap(#[from] InputMapError),
    #[error(transparent)]
    Condensate(#[from] CondensateError),
    #[error(transparent)]
    Ilc(#[from] IlcError),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::NotConverged { .. } => 2,
            HarnessError::Io { .. } => 3,
            _ => 1,
        }
    }
}
