use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_INVALID: i32 = 2;
pub const EXIT_MISSING: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing input file {}", .0.display())]
    Missing(PathBuf),
    #[error(transparent)]
    Core(#[from] landsense_core::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use landsense_core::Error as E;
        match self {
            CliError::Usage(_) => EXIT_INVALID,
            CliError::Missing(_) => EXIT_MISSING,
            CliError::Internal(_) => EXIT_INTERNAL,
            CliError::Core(e) => match e {
                E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING,
                E::Io(_) | E::InvalidNode | E::OutOfBounds { .. } => EXIT_INTERNAL,
                _ => EXIT_INVALID,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
