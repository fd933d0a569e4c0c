use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration; `path` names the offending field.
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error(transparent)]
    Solver(#[from] harvest_core::Error),
}

impl CliError {
    pub fn config(path: &str, e: impl std::fmt::Display) -> CliError {
        CliError::Config {
            path: path.to_string(),
            message: e.to_string(),
        }
    }

    /// Re-labels the error as a config error at `path`.
    pub fn at(self, path: &str) -> CliError {
        match self {
            CliError::Config { message, .. } => CliError::Config { path: path.into(), message },
            other => CliError::config(path, other),
        }
    }

    /// 2 for solver failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(e) if e.is_solver_failure() => 2,
            _ => 1,
        }
    }
}
