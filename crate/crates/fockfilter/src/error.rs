use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Numeric(#[from] fockfilter_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed contents of an input file.
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("failed checks: {}", .0.join(", "))]
    ChecksFailed(Vec<String>),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 usage, 2 numeric failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) | CliError::ChecksFailed(_) => 2,
            CliError::Io { .. } | CliError::Format { .. } => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
