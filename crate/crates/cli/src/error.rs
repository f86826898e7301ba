use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or input data; nothing was computed.
    #[error("invalid configuration: {0}")]
    Validation(String),
    /// The study ran but one of its checks failed; reports are still written.
    #[error("study assertion failed: {0}")]
    Assertion(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Assertion(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<mtrace_core::Error> for CliError {
    fn from(e: mtrace_core::Error) -> Self {
        match e {
            mtrace_core::Error::AtomBudget { .. } => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
