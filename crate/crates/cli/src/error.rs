use thiserror::Error;

/// Failures of a CLI run, each mapped to a process exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    /// Malformed or invalid configuration; `path` locates the offending key.
    #[error("config error at '{path}': {message}")]
    Config { path: String, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("output error: {0}")]
    Io(String),

    #[error("{failed} of {total} checks failed")]
    Verification { failed: usize, total: usize },
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Verification { .. } => 3,
        }
    }
}

impl From<delaykit::Error> for CliError {
    fn from(e: delaykit::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}
