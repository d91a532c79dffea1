use sabr_lab::SabrError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NoConvergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::NoConvergence(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<SabrError> for CliError {
    fn from(e: SabrError) -> Self {
        CliError::Validation(e.to_string())
    }
}
