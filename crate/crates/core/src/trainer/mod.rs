//! Concurrent multi-task PPO over the main and auxiliary tasks, with
//! per-task return normalization and relevance-weighted distillation.

mod config;
mod gae;
mod loss;
mod metrics;
mod popart;
mod rollout;
mod train;

pub use config::{DistillAveraging, RlAveraging, TrainConfig};
pub use gae::compute_gae;
pub use loss::{clipped_surrogate, minibatch_loss, standardize, LossReport, Minibatch, TaskLoss, ADV_EPS};
pub use metrics::{EpisodeWindows, MetricsWriter, UpdateMetrics, WINDOW};
pub use popart::{PopArtState, MIN_SIGMA};
pub use rollout::{derive_rng, sample_episode, Collector, EnvSlot, EpisodeRecord, RolloutBuffer};
pub use train::{net_dims, train, NanDump, TrainOutcome, Trainer, DECOMPOSITION_TOL};

use thiserror::Error;

use crate::env::EnvError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("non-finite loss at update {} (epoch {}, minibatch {})", .0.update, .0.epoch, .0.minibatch_index)]
    NonFinite(Box<NanDump>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
