use std::path::PathBuf;

use thiserror::Error;

/// Harness errors, grouped into exit-code categories.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Numeric(#[from] actnorm::Error),

    #[error("filesystem error at {}: {source}", path.display())]
    Filesystem {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {} at byte offset {offset}: {detail}", path.display())]
    Format { path: PathBuf, offset: u64, detail: String },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn fs(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Filesystem {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 validation, 3 numeric, 4 filesystem, 5 data format.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Parse(_) => 2,
            CliError::Numeric(actnorm::Error::InvalidArgument(_) | actnorm::Error::UnknownActivation { .. }) => 2,
            CliError::Numeric(actnorm::Error::Format { .. }) => 5,
            CliError::Numeric(_) => 3,
            CliError::Filesystem { .. } => 4,
            CliError::Format { .. } => 5,
        }
    }
}
