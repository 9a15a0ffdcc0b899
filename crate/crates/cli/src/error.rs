use std::io;
use std::path::Path;

use imr_core::RepairError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("scenario: {0}")]
    Scenario(#[from] toml::de::Error),

    #[error("{0}")]
    Repair(#[from] RepairError),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn input(e: RepairError) -> Self {
        CliError::Repair(e)
    }

    /// 3 for numerical failures, 2 for everything the user can fix in the
    /// input or flags.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Repair(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }
}
