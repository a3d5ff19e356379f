use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("no path: {0}")]
    NoPath(String),
    #[error("corrupt artifact {}: {msg}", path.display())]
    Corrupt { path: PathBuf, msg: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Other(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::NoPath(_) => 3,
            AppError::Corrupt { .. } => 4,
            AppError::Io { .. } | AppError::Other(_) => 1,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> AppError + '_ {
        move |source| AppError::Io { path: path.to_path_buf(), source }
    }

    pub fn corrupt(path: &Path, msg: impl Into<String>) -> AppError {
        AppError::Corrupt { path: path.to_path_buf(), msg: msg.into() }
    }
}
