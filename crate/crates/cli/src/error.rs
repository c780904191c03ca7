use std::path::Path;

use thiserror::Error;

/// CLI failure, grouped by the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("solver error: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    /// Classifies a library error raised while loading data.
    pub fn from_data(path: &Path, e: fracport::Error) -> Self {
        match e {
            fracport::Error::Config(m) => CliError::Config(m),
            other => CliError::Data(format!("{}: {other}", path.display())),
        }
    }

    /// Classifies a library error raised while solving.
    pub fn from_solve(e: fracport::Error) -> Self {
        use fracport::Error as E;
        match e {
            E::Config(_) | E::TooLarge { .. } | E::Dimension(_) => CliError::Config(e.to_string()),
            E::Parse { .. }
            | E::MissingSentinel { .. }
            | E::MissingData { .. }
            | E::MonthGap { .. }
            | E::WindowOutOfRange { .. }
            | E::EmptyWindow => CliError::Data(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }

    pub fn output(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Config(format!("cannot write {}: {e}", path.display()))
    }
}
