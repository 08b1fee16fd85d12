use serde::{Deserialize, Serialize};

use super::sim::MiniRearrange;
use super::state::EnvState;
use super::task::TaskId;

/// One stage of the rearrangement plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Open,
    Pick,
    PickFromContainer,
    Place,
}

impl Stage {
    /// The auxiliary task that trains this stage.
    pub fn task(self) -> TaskId {
        match self {
            Stage::Open => TaskId::OPEN_CONTAINER,
            Stage::Pick => TaskId::PICK,
            Stage::PickFromContainer => TaskId::PICK_FROM_CONTAINER,
            Stage::Place => TaskId::PLACE,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stage::Open => "open",
            Stage::Pick => "pick",
            Stage::PickFromContainer => "pick_from_container",
            Stage::Place => "place",
        }
    }
}

impl MiniRearrange {
    /// Remaining stages of a main-task episode, computed from privileged state.
    pub fn oracle_task_plan(&self, state: &EnvState) -> Vec<Stage> {
        if self.is_success(state) {
            vec![]
        } else if state.holding {
            vec![Stage::Place]
        } else if self.object_in_container(state) {
            if state.container_open {
                vec![Stage::PickFromContainer, Stage::Place]
            } else {
                vec![Stage::Open, Stage::PickFromContainer, Stage::Place]
            }
        } else {
            vec![Stage::Pick, Stage::Place]
        }
    }
}
