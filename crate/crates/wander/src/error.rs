use std::io;

/// Failures of a command, each with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Schema(String),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Schema(_) => 2,
            AppError::Compute(_) | AppError::Io(_) => 3,
        }
    }
}

impl From<wander_core::Error> for AppError {
    fn from(e: wander_core::Error) -> Self {
        AppError::Compute(e.to_string())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Compute(e.to_string())
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Compute(e.to_string())
    }
}

impl From<png::EncodingError> for AppError {
    fn from(e: png::EncodingError) -> Self {
        AppError::Compute(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
