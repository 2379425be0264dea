//! CLI error categories and their exit codes.

use std::path::PathBuf;
use thiserror::Error;

/// Everything the binary can fail with, grouped into the categories the
/// exit code reports: 2 configuration, 3 data, 4 solver, 5 io.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    /// Wraps a std::io error with the path it concerns.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<qgl_core::Error> for CliError {
    fn from(e: qgl_core::Error) -> Self {
        use qgl_core::Error as E;
        match &e {
            E::InvalidParameter(_) => CliError::Config(e.to_string()),
            E::DimensionMismatch(_)
            | E::InvalidData(_)
            | E::InvalidGroups(_)
            | E::ZeroVariance { .. }
            | E::Parse(_) => CliError::Data(e.to_string()),
            E::LinearProgram(_) | E::CrossValidation(_) => CliError::Solver(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
