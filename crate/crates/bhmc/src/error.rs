use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{}: row {row}, column {col}: {reason}", path.display())]
    Cell { path: PathBuf, row: usize, col: usize, reason: String },
    #[error("{}: row {row} has {got} fields, expected {expected}", path.display())]
    Ragged { path: PathBuf, row: usize, expected: usize, got: usize },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: unsupported schema version {version}", path.display())]
    Schema { path: PathBuf, version: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed tree export: {0}")]
    Export(String),
    #[error("chain thread panicked")]
    Chain,
    #[error(transparent)]
    Model(#[from] bhmc_core::Error),
}

impl CliError {
    /// Process exit status: 2 for unusable input or configuration, 1 for
    /// failures inside the model.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(_) | CliError::Chain | CliError::Write { .. } => 1,
            _ => 2,
        }
    }
}
