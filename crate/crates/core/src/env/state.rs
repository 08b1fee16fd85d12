use serde::{Deserialize, Serialize};

use super::episode::EpisodeConfig;
use super::grid::Cell;
use super::task::{TaskId, NUM_TASKS};

/// Discrete action set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    North,
    East,
    South,
    West,
    Open,
    Pick,
    Place,
}

pub const NUM_ACTIONS: usize = 7;

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] =
        [Action::North, Action::East, Action::South, Action::West, Action::Open, Action::Pick, Action::Place];

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn delta(self) -> Option<(i32, i32)> {
        match self {
            Action::North => Some((0, -1)),
            Action::East => Some((1, 0)),
            Action::South => Some((0, 1)),
            Action::West => Some((-1, 0)),
            _ => None,
        }
    }
}

/// Full simulator state of one episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvState {
    pub agent_pos: Cell,
    pub object_pos: Cell,
    pub holding: bool,
    pub container_open: bool,
    pub did_pick: bool,
    pub step_count: u32,
    pub task: TaskId,
    pub episode: EpisodeConfig,
    /// Where the agent started this episode; coordinate sensors are relative to it.
    pub spawn: Cell,
}

/// Policy-visible sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub agent_pos_norm: [f64; 2],
    pub object_start_rel: [f64; 2],
    pub goal_rel: [f64; 2],
    pub holding: f64,
    pub container_open_sensed: f64,
    pub task_indicator: [f64; NUM_TASKS],
}

/// Non-indicator features in a flattened observation.
pub const FEATURE_DIM: usize = 8;
/// Width of a flattened observation row, task indicator last.
pub const OBS_DIM: usize = FEATURE_DIM + NUM_TASKS;

impl Observation {
    pub fn write_into(&self, out: &mut [f64]) {
        assert_eq!(out.len(), OBS_DIM, "observation row has wrong width");
        out[0..2].copy_from_slice(&self.agent_pos_norm);
        out[2..4].copy_from_slice(&self.object_start_rel);
        out[4..6].copy_from_slice(&self.goal_rel);
        out[6] = self.holding;
        out[7] = self.container_open_sensed;
        out[FEATURE_DIM..].copy_from_slice(&self.task_indicator);
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![0.0; OBS_DIM];
        self.write_into(&mut v);
        v
    }
}

/// Events that happened on one transition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageInfo {
    pub picked: bool,
    pub opened: bool,
    pub placed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub next_state: EnvState,
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
    pub stage_info: StageInfo,
}
