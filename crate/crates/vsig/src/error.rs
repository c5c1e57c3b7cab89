//! Application errors with the CLI's exit-code contract.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    /// Malformed or inconsistent configuration (exit code 2).
    #[error("config error: {0}")]
    Config(String),
    /// Bad input data (exit code 3).
    #[error("data error: {0}")]
    Data(String),
    #[error("compute error: {0}")]
    Compute(#[from] vsig_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Data(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
