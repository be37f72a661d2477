use thiserror::Error;

/// Exit code for configuration and usage errors.
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_VALIDATION_FAILED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] molcom_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("optimizer did not converge within {0} iterations")]
    NotConverged(usize),

    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::ValidationFailed(_) => EXIT_VALIDATION_FAILED,
            CliError::Config(_) | CliError::Model(_) | CliError::Io(_) => EXIT_CONFIG,
        }
    }
}
