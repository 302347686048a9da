//! Error type and the exit-code contract of the binary.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}: {message}")]
    Schema { file: String, message: String },
    #[error("{file}: unknown label `{label}`")]
    Label { file: String, label: String },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] pmlp_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(file: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema {
            file: file.into(),
            message: message.into(),
        }
    }

    /// 0 ok, 2 config/schema, 3 numerical factorization, 4 overflow.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(pmlp_core::Error::FactorizationError { .. }) => 3,
            CliError::Core(pmlp_core::Error::NumericalOverflow { .. }) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
