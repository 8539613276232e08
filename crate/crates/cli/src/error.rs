use std::path::PathBuf;

use thiserror::Error;

/// Front-end errors, one variant per exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefixes the message with where it happened.
    pub(crate) fn context(self, what: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{what}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{what}: {m}")),
            io => io,
        }
    }
}

impl From<iatf_core::Error> for CliError {
    fn from(e: iatf_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
