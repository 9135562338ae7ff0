use std::path::{Path, PathBuf};

use gap_core::{ErrorClass, GapError};
use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Gap(#[from] GapError),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 validation, 3 numeric failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Gap(e) => match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Numeric => 3,
                ErrorClass::Io => 4,
            },
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
        }
    }
}
