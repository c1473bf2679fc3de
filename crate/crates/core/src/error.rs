use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the integrators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: expected {expected} values, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("field of dimension {field_dim} with {field_n} modes per axis does not fit basis (d = {basis_dim}, N = {basis_n})")]
    BasisMismatch {
        field_dim: usize,
        field_n: usize,
        basis_dim: usize,
        basis_n: usize,
    },

    #[error("expected a {expected} field")]
    WrongRepresentation { expected: &'static str },

    #[error("negative time step {0}")]
    NegativeTime(f64),

    #[error("unsupported dimension {0}; only d = 1 and d = 2 are supported")]
    UnsupportedDimension(usize),

    #[error("operation requires d = 1, basis has d = {0}")]
    RequiresOneDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{steps} steps do not divide the master path resolution {master_steps}")]
    StepsDoNotDivide { steps: usize, master_steps: usize },

    #[error("noise truncation K = {k} exceeds the master path mode budget {k_ref}")]
    ModeBudgetExceeded { k: usize, k_ref: usize },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error(
        "splitting-up requires a linear multiplicative problem (f = 0, b(x, y) = y); '{0}' is not"
    )]
    NotLinearMultiplicative(String),

    #[error("unknown problem '{name}'; available presets: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("unknown scheme '{0}'; expected one of milstein, implicit_euler, exponential_euler, splitting")]
    UnknownScheme(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed field file: {0}")]
    FieldFormat(String),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
