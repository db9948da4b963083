//! Configuration, figure presets and file output for the two-photon
//! resonance toolkit.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind, Model, TimeGrid, TrajectoryInit, TrajectorySettings};
pub use presets::{figure_presets, PresetName};
pub use run::{default_workers, run_experiment, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

impl CliError {
    /// 2 for a bad configuration, 3 for anything that failed while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) | Self::Io(..) => 3,
        }
    }
}
