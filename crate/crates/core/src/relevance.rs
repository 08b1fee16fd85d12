//! Auxiliary-task relevance: which auxiliary behaviour applies to a main-task
//! state. Uses privileged simulator state, never the observation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvState, MiniRearrange, TaskId, NUM_TASKS};

/// Number of auxiliary tasks.
pub const NUM_AUX: usize = NUM_TASKS - 1;

/// Indicator weights over the auxiliary tasks; entry `i` belongs to task `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelevanceVector {
    pub weights: [f64; NUM_AUX],
}

impl RelevanceVector {
    pub fn one_hot(task: TaskId) -> Self {
        let mut weights = [0.0; NUM_AUX];
        weights[task.index() - 1] = 1.0;
        RelevanceVector { weights }
    }

    pub fn weight(&self, task: TaskId) -> f64 {
        if task.is_main() {
            0.0
        } else {
            self.weights[task.index() - 1]
        }
    }

    /// Zeroes the weights of tasks for which `keep` is false.
    pub fn masked(mut self, keep: impl Fn(TaskId) -> bool) -> Self {
        for (i, w) in self.weights.iter_mut().enumerate() {
            if !keep(TaskId::AUXILIARY[i]) {
                *w = 0.0;
            }
        }
        self
    }

    pub fn active(&self) -> impl Iterator<Item = (TaskId, f64)> + '_ {
        self.weights.iter().enumerate().filter(|(_, w)| **w != 0.0).map(|(i, w)| (TaskId::AUXILIARY[i], *w))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RelevanceError {
    #[error("relevance is only defined for main-task states, got {0}")]
    NotMainTask(TaskId),
    #[error("relevance is undefined on terminal states")]
    Terminal,
}

pub fn relevance(env: &MiniRearrange, state: &EnvState) -> Result<RelevanceVector, RelevanceError> {
    if !state.task.is_main() {
        return Err(RelevanceError::NotMainTask(state.task));
    }
    if env.is_done(state) {
        return Err(RelevanceError::Terminal);
    }
    let task = if state.holding {
        TaskId::PLACE
    } else if env.object_in_container(state) {
        if state.container_open {
            TaskId::PICK_FROM_CONTAINER
        } else {
            TaskId::OPEN_CONTAINER
        }
    } else {
        TaskId::PICK
    };
    Ok(RelevanceVector::one_hot(task))
}
