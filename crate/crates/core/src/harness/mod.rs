//! Experiment orchestration.

pub mod build;
pub mod config;
pub mod endgame;
pub mod outputs;
pub mod run;
pub mod runner;
pub mod stats;
pub mod sweep;

pub use build::{build_trainer, AnyTrainer};
pub use config::{DqnConfig, EnvConfig, LearnerKind, RunConfig, SelectorConfig};
pub use run::{evaluate_checkpoint, run_seed, EvalSummary, RunOutput};
pub use runner::{EpisodeRecord, Schedule, Trainer};
