//! Experiment driver for auxiliary-task distillation: method and baseline
//! selection, greedy evaluation, multi-seed aggregation, λ sweeps, auxiliary
//! subset ablations and learning-curve export.

pub mod config;
pub mod eval;
pub mod experiment;
pub mod plot;
pub mod report;

use auxdistill_core::checkpoint::CheckpointError;
use auxdistill_core::trainer::TrainError;
use thiserror::Error;

pub use config::{ExperimentConfig, Method};
pub use experiment::{run_experiment, sweep_lambda, ExperimentSummary};
pub use report::EvalReport;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: row {row}: {message}")]
    Csv { path: String, row: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
