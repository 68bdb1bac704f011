//! Orchestration of eflab experiments: configuration, dispatch and report
//! files. The `eflab` binary is a thin wrapper over [`run::run`].

pub mod config;
pub mod experiments;
pub mod run;
pub mod verdict;

pub use config::{Experiment, RunConfig};
pub use experiments::{execute, Outcome};
pub use run::{run, RunRecord};
pub use verdict::Verdict;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] eflab_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Short machine-readable class used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(
                eflab_core::Error::InvalidGrid(_)
                | eflab_core::Error::InvalidParameter(_)
                | eflab_core::Error::Constraint(_)
                | eflab_core::Error::Cutoff(_),
            ) => "config",
            CliError::Core(_) => "numerics",
            CliError::Io(_) => "io",
        }
    }
}
