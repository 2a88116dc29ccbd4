use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", config_message(.line, .message))]
    Config { line: Option<usize>, message: String },

    #[error("{0}")]
    Core(#[from] parctrl_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("verification failed: {}", .0.join(", "))]
    VerifyFailed(Vec<String>),
}

fn config_message(line: &Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("config line {l}: {message}"),
        None => format!("config: {message}"),
    }
}

impl CliError {
    pub fn config(line: impl Into<Option<usize>>, message: impl Into<String>) -> Self {
        CliError::Config {
            line: line.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for failed properties, 2 for bad input, 3 for solver non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::NotConverged(_) => 3,
            CliError::Core(parctrl_core::Error::NoConvergence { .. }) => 3,
            CliError::Core(parctrl_core::Error::NotPositiveDefinite { .. }) => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
