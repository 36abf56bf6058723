//! Error categories with a stable exit-code contract:
//! 0 success, 2 config error, 3 scenario error, 4 budget/cap exhaustion.

use adaptlab_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("budget error: {0}")]
    Budget(String),
    #[error("io error: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Scenario(_) => 3,
            RunError::Budget(_) => 4,
            RunError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for RunError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::ReferenceExceedsCap(_) | CoreError::BudgetExceeded(_) => {
                RunError::Budget(err.to_string())
            }
            other => RunError::Scenario(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(err: std::io::Error) -> Self {
        RunError::Io(err.to_string())
    }
}
