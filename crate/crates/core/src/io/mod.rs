//! Configuration, orchestration and persistence.

pub mod checkpoint;
pub mod config;
pub mod run;

pub use checkpoint::Checkpoint;
pub use config::{parse_config, Experiment, ForcingConfig, InitialData, ProfileConfig, RunConfig, EXPERIMENT_NAMES};
pub use run::{run, selftest, Manifest, ManifestEntry, RunOutcome};
