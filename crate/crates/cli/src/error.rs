use thiserror::Error;

/// Failure classes, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0:#}")]
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    /// Classifies a library error raised while loading inputs.
    pub fn from_input(context: String, e: dtcns::Error) -> Self {
        match e {
            dtcns::Error::Parse { .. } => CliError::Parse(format!("{context}: {e}")),
            _ => CliError::Config(format!("{context}: {e}")),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}
