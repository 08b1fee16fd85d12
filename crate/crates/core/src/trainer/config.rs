use serde::{Deserialize, Serialize};

use crate::env::{GridWorldSpec, TaskId, NUM_TASKS};

use super::TrainError;

/// Divisor applied to the sum of per-task RL losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RlAveraging {
    /// Divide by the number of auxiliary tasks N, even though N + 1 terms are summed.
    #[default]
    PerAuxTask,
    /// Divide by the number of summed terms.
    Mean,
}

/// Normalization of the relevance-weighted KL sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistillAveraging {
    /// Plain weighted sum over auxiliary tasks.
    #[default]
    Sum,
    /// Weighted sum divided by the number of auxiliary tasks.
    PerAuxTask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Distillation weight.
    pub lambda: f64,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr: f64,
    /// Steps over which the learning rate decays linearly to zero; defaults to `total_steps`.
    pub lr_decay_steps: Option<u64>,
    /// Rollout horizon per collection phase.
    pub rollout_len: usize,
    pub envs_per_task: usize,
    pub ppo_epochs: usize,
    pub minibatches: usize,
    /// Environment-step budget, auxiliary-task steps included.
    pub total_steps: u64,
    pub popart_beta: f64,
    pub hidden: usize,
    pub max_grad_norm: Option<f64>,
    /// Block the distillation gradient through the auxiliary-task branch.
    pub distill_stop_gradient: bool,
    pub rl_averaging: RlAveraging,
    pub distill_averaging: DistillAveraging,
    /// Auxiliary tasks that get env slots and can receive relevance weight.
    pub aux_tasks: Vec<TaskId>,
    /// Whether the main task gets env slots.
    pub train_main: bool,
    pub grid: GridWorldSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.1,
            clip_eps: 0.2,
            gamma: 0.999,
            gae_lambda: 0.95,
            entropy_coef: 0.001,
            value_coef: 0.5,
            lr: 3e-4,
            lr_decay_steps: None,
            rollout_len: 128,
            envs_per_task: 8,
            ppo_epochs: 2,
            minibatches: 4,
            total_steps: 2_000_000,
            popart_beta: 3e-4,
            hidden: 64,
            max_grad_norm: Some(0.5),
            distill_stop_gradient: false,
            rl_averaging: RlAveraging::PerAuxTask,
            distill_averaging: DistillAveraging::Sum,
            aux_tasks: TaskId::AUXILIARY.to_vec(),
            train_main: true,
            grid: GridWorldSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad(format!("clip_eps must be in (0, 1), got {}", self.clip_eps));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!("gae_lambda must be in [0, 1], got {}", self.gae_lambda));
        }
        if self.lr < 0.0 || self.entropy_coef < 0.0 || self.value_coef < 0.0 {
            return bad("lr, entropy_coef and value_coef must be non-negative".into());
        }
        if !(self.popart_beta > 0.0 && self.popart_beta <= 1.0) {
            return bad(format!("popart_beta must be in (0, 1], got {}", self.popart_beta));
        }
        if self.rollout_len == 0 || self.envs_per_task == 0 || self.ppo_epochs == 0 || self.hidden == 0 {
            return bad("rollout_len, envs_per_task, ppo_epochs and hidden must be positive".into());
        }
        if self.minibatches == 0 || self.minibatches > self.rollout_len {
            return bad(format!("minibatches must be in [1, rollout_len], got {}", self.minibatches));
        }
        for (i, t) in self.aux_tasks.iter().enumerate() {
            if t.is_main() {
                return bad("aux_tasks cannot contain the main task".into());
            }
            if self.aux_tasks[..i].contains(t) {
                return bad(format!("aux task {t} listed twice"));
            }
        }
        if self.active_tasks().is_empty() {
            return bad("no task has environment slots".into());
        }
        crate::env::Grid::new(self.grid.clone()).map_err(|e| TrainError::Config(e.to_string()))?;
        Ok(())
    }

    /// Tasks with environment slots, in index order.
    pub fn active_tasks(&self) -> Vec<TaskId> {
        TaskId::ALL
            .into_iter()
            .filter(|t| if t.is_main() { self.train_main } else { self.aux_tasks.contains(t) })
            .collect()
    }

    /// Environment slots per active task. The slot total is always
    /// `envs_per_task * NUM_TASKS`; slots of disabled tasks are spread over the
    /// active ones, remainder first.
    pub fn slot_counts(&self) -> Vec<(TaskId, usize)> {
        let active = self.active_tasks();
        let total = self.envs_per_task * NUM_TASKS;
        let base = total / active.len();
        let extra = total % active.len();
        active.into_iter().enumerate().map(|(i, t)| (t, base + usize::from(i < extra))).collect()
    }

    pub fn steps_per_update(&self) -> u64 {
        (self.envs_per_task * NUM_TASKS * self.rollout_len) as u64
    }

    /// Number of auxiliary tasks N.
    pub fn n_aux(&self) -> usize {
        self.aux_tasks.len()
    }

    pub fn rl_divisor(&self) -> f64 {
        let n_terms = self.active_tasks().len();
        let d = match self.rl_averaging {
            RlAveraging::PerAuxTask => self.n_aux(),
            RlAveraging::Mean => n_terms,
        };
        d.max(1) as f64
    }

    pub fn distill_divisor(&self) -> f64 {
        match self.distill_averaging {
            DistillAveraging::Sum => 1.0,
            DistillAveraging::PerAuxTask => self.n_aux().max(1) as f64,
        }
    }

    pub fn lr_at(&self, steps_done: u64) -> f64 {
        let horizon = self.lr_decay_steps.unwrap_or(self.total_steps).max(1) as f64;
        self.lr * (1.0 - steps_done as f64 / horizon).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.slot_counts().iter().map(|s| s.1).collect::<Vec<_>>(), vec![8; 5]);
        assert_eq!(c.rl_divisor(), 4.0);
        assert_eq!(c.steps_per_update(), 5 * 8 * 128);
    }

    #[test]
    fn slot_reassignment_keeps_total() {
        let mut c = TrainConfig { aux_tasks: vec![], ..Default::default() };
        assert_eq!(c.slot_counts(), vec![(TaskId::MAIN, 40)]);
        assert_eq!(c.rl_divisor(), 1.0);
        c.aux_tasks = vec![TaskId::PLACE, TaskId::OPEN_CONTAINER, TaskId::PICK_FROM_CONTAINER];
        assert_eq!(c.slot_counts().iter().map(|s| s.1).sum::<usize>(), 40);
        c.train_main = false;
        c.aux_tasks = TaskId::AUXILIARY.to_vec();
        assert!(c.slot_counts().iter().all(|(t, n)| !t.is_main() && *n == 10));
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            TrainConfig { lambda: -0.1, ..Default::default() },
            TrainConfig { gamma: 0.0, ..Default::default() },
            TrainConfig { clip_eps: 1.0, ..Default::default() },
            TrainConfig { aux_tasks: vec![TaskId::MAIN], ..Default::default() },
            TrainConfig { aux_tasks: vec![], train_main: false, ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn lr_decays_linearly_to_zero() {
        let c = TrainConfig { total_steps: 1000, ..Default::default() };
        assert_eq!(c.lr_at(0), 3e-4);
        assert!((c.lr_at(500) - 1.5e-4).abs() < 1e-18);
        assert_eq!(c.lr_at(2000), 0.0);
    }

    #[test]
    fn json_overrides_fill_defaults() {
        let c: TrainConfig = serde_json::from_str(r#"{"lambda": 0.0, "aux_tasks": ["pick"]}"#).unwrap();
        assert_eq!(c.lambda, 0.0);
        assert_eq!(c.aux_tasks, vec![TaskId::PICK]);
        assert_eq!(c.gamma, 0.999);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lamda": 0.0}"#).is_err());
    }
}
