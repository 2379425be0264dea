//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by dataset construction, fitting and reporting.
#[derive(Debug, Error)]
pub enum Error {
    /// Array shapes or lengths do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// Group labels violate the 1..K contiguous-label contract.
    #[error("invalid group structure: {0}")]
    InvalidGroups(String),
    /// A feature column has zero sample variance and cannot be scaled.
    #[error("feature `{name}` (column {index}) has zero variance")]
    ZeroVariance { index: usize, name: String },
    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Input data violates an invariant (ordering, finiteness, size).
    #[error("invalid data: {0}")]
    InvalidData(String),
    /// The simplex oracle could not solve the linear program.
    #[error("linear program: {0}")]
    LinearProgram(String),
    /// No cross-validation cell produced a usable score.
    #[error("cross-validation: {0}")]
    CrossValidation(String),
    /// Text deserialization of a stored fit failed.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
