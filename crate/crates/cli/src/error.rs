use std::path::PathBuf;

use thiserror::Error;

/// Failure classes, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) | CliError::Io { .. } => 2,
            CliError::Verification(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Sorts core errors into config-time and run-time failures.
impl From<sqg_core::Error> for CliError {
    fn from(e: sqg_core::Error) -> Self {
        use sqg_core::Error as E;
        match e {
            E::InvalidGrid(_)
            | E::InvalidParameter { .. }
            | E::DivergentTrace { .. }
            | E::DegenerateMode { .. }
            | E::Snapshot(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
