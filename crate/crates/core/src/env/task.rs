use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EnvError;

/// Number of task slots: the main task plus four auxiliary tasks.
pub const NUM_TASKS: usize = 5;

/// Index of a task. 0 is the main rearrangement task, 1..=4 are auxiliary.
///
/// Indices key the one-hot task indicator and the value-head slots, so they
/// never change within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TaskId(u8);

impl TaskId {
    pub const MAIN: TaskId = TaskId(0);
    pub const PICK: TaskId = TaskId(1);
    pub const PLACE: TaskId = TaskId(2);
    pub const OPEN_CONTAINER: TaskId = TaskId(3);
    pub const PICK_FROM_CONTAINER: TaskId = TaskId(4);

    pub const ALL: [TaskId; NUM_TASKS] =
        [TaskId::MAIN, TaskId::PICK, TaskId::PLACE, TaskId::OPEN_CONTAINER, TaskId::PICK_FROM_CONTAINER];
    pub const AUXILIARY: [TaskId; NUM_TASKS - 1] =
        [TaskId::PICK, TaskId::PLACE, TaskId::OPEN_CONTAINER, TaskId::PICK_FROM_CONTAINER];

    pub fn from_index(index: usize) -> Result<TaskId, EnvError> {
        if index < NUM_TASKS {
            Ok(TaskId(index as u8))
        } else {
            Err(EnvError::UnknownTask(index.to_string()))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_main(self) -> bool {
        self.0 == 0
    }

    pub fn name(self) -> &'static str {
        match self.0 {
            0 => "main",
            1 => "pick",
            2 => "place",
            3 => "open_container",
            _ => "pick_from_container",
        }
    }

    /// One-hot indicator of length [`NUM_TASKS`].
    pub fn indicator(self) -> [f64; NUM_TASKS] {
        let mut v = [0.0; NUM_TASKS];
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskId {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskId::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| EnvError::UnknownTask(s.to_string()))
    }
}

impl TryFrom<String> for TaskId {
    type Error = EnvError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<TaskId> for String {
    fn from(t: TaskId) -> String {
        t.name().to_string()
    }
}
