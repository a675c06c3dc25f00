use gumbel_exit::ErrorCategory;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] gumbel_exit::Error),

    /// Outputs were written but at least one check did not hold.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 config, 3 unsupported model/boundary, 4 verification, 5 resource.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => core_exit_code(e),
            CliError::Verification(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

/// Exit status for a core error, by category.
pub fn core_exit_code(e: &gumbel_exit::Error) -> u8 {
    match e.category() {
        ErrorCategory::Config => 2,
        ErrorCategory::Unsupported => 3,
        ErrorCategory::Verification => 4,
        ErrorCategory::Resource => 5,
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}
