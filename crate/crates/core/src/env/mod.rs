//! MiniRearrange: a small deterministic gridworld with one movable object,
//! one container and one goal cell, plus the auxiliary tasks carved out of
//! the full rearrangement.

mod dataset;
mod episode;
mod expert;
pub(crate) mod grid;
mod plan;
mod sim;
mod state;
mod task;

pub use dataset::{read_episodes, write_episodes};
pub use episode::{episodes_of, generate_episode, Difficulty, EpisodeConfig, Split, EVAL_SEEDS, TRAIN_SEEDS};
pub use expert::ScriptedExpert;
pub use grid::{Cell, Grid, GridWorldSpec, UNREACHABLE};
pub use plan::Stage;
pub use sim::{MiniRearrange, OPEN_BONUS, PICK_BONUS, SENSE_RADIUS, SHAPING, SUCCESS_BONUS};
pub use state::{Action, EnvState, Observation, StageInfo, StepResult, FEATURE_DIM, NUM_ACTIONS, OBS_DIM};
pub use task::{TaskId, NUM_TASKS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid episode: {0}")]
    InvalidEpisode(String),
    #[error("task {task} cannot run on a {difficulty} episode")]
    IncompatibleEpisode { task: TaskId, difficulty: Difficulty },
    #[error("step called on a finished episode")]
    EpisodeDone,
    #[error("action {0} out of range")]
    InvalidAction(usize),
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("{0} is not an auxiliary task")]
    NotAuxiliary(TaskId),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
