//! Configuration, seeded experiment orchestration and report emission.

pub mod config;
pub mod experiment;
pub mod sweep;

pub use config::{ExperimentConfig, Method, QuantizerKind, SweepConfig};
pub use experiment::{run_experiment, RunReport};
pub use sweep::emit_rate_sweep;
