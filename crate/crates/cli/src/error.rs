use nd_core::NdError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input file.
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    /// Rejected parameters or a broken simulation invariant.
    #[error(transparent)]
    Invalid(#[from] NdError),
    #[error("sweep has {points} grid points, above the cap of {cap}")]
    Cap { points: usize, cap: usize },
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Invalid(_) => 3,
            CliError::Cap { .. } => 4,
            CliError::Io { .. } | CliError::Output { .. } => 1,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
