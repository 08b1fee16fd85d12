use std::path::{Path, PathBuf};

use auxdistill_core::env::TaskId;
use auxdistill_core::trainer::{TrainConfig, TrainError};
use serde::{Deserialize, Serialize};

use crate::eval::EvalAction;
use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

/// Share of the step budget spent on auxiliary tasks before the curriculum
/// switches to the main task.
pub const CURRICULUM_PHASE1_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(rename = "auxdistill", alias = "aux_distill")]
    AuxDistill,
    Monolithic,
    NoDistill,
    Curriculum,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::AuxDistill => "auxdistill",
            Method::Monolithic => "monolithic",
            Method::NoDistill => "no_distill",
            Method::Curriculum => "curriculum",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auxdistill" => Ok(Method::AuxDistill),
            "monolithic" => Ok(Method::Monolithic),
            "no_distill" | "no-distill" => Ok(Method::NoDistill),
            "curriculum" => Ok(Method::Curriculum),
            other => Err(HarnessError::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// One experiment: a method, its training config, seeds and evaluation size.
///
/// Read from JSON. Missing fields take their defaults; `train` accepts any
/// subset of [`TrainConfig`] fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub method: Method,
    /// Auxiliary tasks to train alongside the main task; `None` keeps
    /// `train.aux_tasks`.
    pub aux_tasks: Option<Vec<TaskId>>,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    /// Evaluation episodes per split and difficulty.
    pub eval_episodes: usize,
    /// Action selection during evaluation.
    pub eval_action: EvalAction,
    pub output_dir: PathBuf,
    /// Write a checkpoint every this many updates (the final one is always written).
    pub checkpoint_every: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            method: Method::AuxDistill,
            aux_tasks: None,
            train: TrainConfig::default(),
            seeds: vec![0, 1, 2],
            eval_episodes: 200,
            eval_action: EvalAction::Greedy,
            output_dir: PathBuf::from("runs"),
            checkpoint_every: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if self.eval_episodes == 0 {
            return Err(HarnessError::Config("eval_episodes must be at least 1".into()));
        }
        if self.checkpoint_every == Some(0) {
            return Err(HarnessError::Config("checkpoint_every must be positive".into()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(HarnessError::Config("seeds must be distinct".into()));
        }
        self.resolved_train().validate().map_err(|e| match e {
            TrainError::Config(m) => HarnessError::Config(m),
            other => HarnessError::Config(other.to_string()),
        })
    }

    /// Training config after the method's constraints are applied. For the
    /// curriculum this is the shared base; phases are derived from it.
    pub fn resolved_train(&self) -> TrainConfig {
        let mut t = self.train.clone();
        if let Some(aux) = &self.aux_tasks {
            t.aux_tasks = aux.clone();
        }
        match self.method {
            Method::AuxDistill => {}
            Method::Monolithic => {
                t.aux_tasks.clear();
                t.train_main = true;
            }
            Method::NoDistill | Method::Curriculum => t.lambda = 0.0,
        }
        t
    }
}

/// The auxiliary-set ablation: all tasks, then each of PickFromContainer,
/// OpenContainer and Pick removed.
pub fn ablation_subsets() -> Vec<(&'static str, Vec<TaskId>)> {
    let without = |t: TaskId| TaskId::AUXILIARY.into_iter().filter(|a| *a != t).collect::<Vec<_>>();
    vec![
        ("all", TaskId::AUXILIARY.to_vec()),
        ("no_pick_from_container", without(TaskId::PICK_FROM_CONTAINER)),
        ("no_open_container", without(TaskId::OPEN_CONTAINER)),
        ("no_pick", without(TaskId::PICK)),
    ]
}
