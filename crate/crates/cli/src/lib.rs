//! Experiment harness around `vrlmc-core`: configuration, dataset CSV
//! ingestion, train/test splitting, grid search with replication, and
//! results emission. The `vrlmc` binary is a thin dispatcher over this
//! library so everything here is testable in-process.

pub mod config;
pub mod dataio;
pub mod experiment;

/// Harness errors, split by exit code: configuration/input problems exit
/// with 2, numerical failures with 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CliError::Numerical(msg.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<vrlmc_core::samplers::ChainError> for CliError {
    fn from(err: vrlmc_core::samplers::ChainError) -> Self {
        use vrlmc_core::samplers::ChainError;
        match err {
            ChainError::Diverged { .. } => CliError::Numerical(err.to_string()),
            _ => CliError::Config(err.to_string()),
        }
    }
}

impl From<vrlmc_core::metrics::MetricError> for CliError {
    fn from(err: vrlmc_core::metrics::MetricError) -> Self {
        CliError::Numerical(err.to_string())
    }
}
