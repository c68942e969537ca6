//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Elementary operation evaluated outside its domain (div by ~0, ln of x <= 0).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed configuration (layer sizes, spec files, unknown strategy names).
    #[error("config error: {0}")]
    Config(String),

    /// Non-finite or out-of-range state encountered during numeric work.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),

    /// Well-formed input violating a semantic contract (unsorted times, out of range).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("zero vector has no direction")]
    ZeroVector,

    /// Analysis check requested on a trace whose run mode does not support it.
    #[error("mode error: {0}")]
    Mode(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
