use std::path::PathBuf;

use thiserror::Error;
use tvopt::TvError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("malformed config: {0}")]
    Config(String),

    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),

    #[error(transparent)]
    Solver(#[from] TvError),

    #[error("{0} of {1} sweep runs failed")]
    SweepFailures(usize, usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Solver(TvError::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}
