//! Orchestration behind the `vsense` binary: dataset generation, training
//! runs per regime and seed, evaluation, reconstruction dumps and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod layout;

pub use commands::{
    cmd_evaluate, cmd_generate, cmd_reconstruct, cmd_report, cmd_train, cmd_train_all, load_dataset, EvalFile,
    Manifest, ReconstructRequest, ReconstructSummary, Timing, TrainRunFile,
};
pub use config::{ConditionEntry, DatasetParams, RegimeOverride, RunConfig, TrainingParams};
pub use error::CliError;
pub use layout::Layout;
