use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{MiniRearrange, TaskId, NUM_ACTIONS, NUM_TASKS, OBS_DIM};
use crate::nn::{AdamState, NetDims, PolicyParams};

use super::config::TrainConfig;
use super::gae::compute_gae;
use super::loss::{minibatch_loss, LossReport, Minibatch};
use super::metrics::{EpisodeWindows, UpdateMetrics};
use super::popart::PopArtState;
use super::rollout::{derive_rng, Collector, RolloutBuffer};
use super::TrainError;

/// Allowed gap between a minibatch's total loss and the sum of its parts.
pub const DECOMPOSITION_TOL: f64 = 1e-9;

pub fn net_dims(cfg: &TrainConfig) -> NetDims {
    NetDims { obs_dim: OBS_DIM, hidden: cfg.hidden, n_actions: NUM_ACTIONS, n_values: NUM_TASKS }
}

/// What a NaN abort leaves behind for inspection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NanDump {
    pub update: u64,
    pub epoch: usize,
    pub minibatch_index: usize,
    pub report: LossReport,
    pub minibatch: Minibatch,
}

/// Training rows after GAE and return normalization.
struct PreparedBatch {
    advantages: Vec<f64>,
    targets: Vec<f64>,
}

/// Multi-task PPO with relevance-weighted distillation.
///
/// One `update` = collect `rollout_len` steps in every env slot, estimate
/// advantages, refresh return statistics, then run `ppo_epochs` passes of
/// `minibatches` gradient steps.
pub struct Trainer {
    cfg: TrainConfig,
    params: PolicyParams,
    adam: AdamState,
    popart: PopArtState,
    collector: Collector,
    shuffle_rng: ChaCha8Rng,
    windows: EpisodeWindows,
    steps_done: u64,
    steps_per_task: [u64; NUM_TASKS],
    updates: u64,
    /// Added to reported step/update counters, for chained training phases.
    step_offset: u64,
    update_offset: u64,
    seed_range: Option<(u64, u64)>,
    started: Instant,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, seed: u64) -> Result<Self, TrainError> {
        cfg.validate()?;
        let params = PolicyParams::init(net_dims(&cfg), &mut derive_rng(seed, 1));
        let popart = PopArtState::new(NUM_TASKS, cfg.popart_beta);
        Self::with_state(cfg, seed, params, popart)
    }

    /// Continues from existing weights and return statistics with a fresh
    /// optimizer and learning-rate schedule.
    pub fn with_state(
        cfg: TrainConfig,
        seed: u64,
        params: PolicyParams,
        popart: PopArtState,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        if params.dims() != net_dims(&cfg) {
            return Err(TrainError::Config("parameter shape does not match config".into()));
        }
        let env = MiniRearrange::new(cfg.grid.clone())?;
        let collector = Collector::new(env, &cfg.slot_counts(), cfg.aux_tasks.clone(), seed)?;
        Ok(Trainer {
            adam: AdamState::new(params.as_slice().len()),
            params,
            popart,
            collector,
            shuffle_rng: derive_rng(seed, 2),
            windows: EpisodeWindows::new(),
            steps_done: 0,
            steps_per_task: [0; NUM_TASKS],
            updates: 0,
            step_offset: 0,
            update_offset: 0,
            seed_range: None,
            started: Instant::now(),
            cfg,
        })
    }

    pub fn with_offsets(mut self, steps: u64, updates: u64) -> Self {
        self.step_offset = steps;
        self.update_offset = updates;
        self
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn popart(&self) -> &PopArtState {
        &self.popart
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn steps_done(&self) -> u64 {
        self.steps_done
    }

    /// Smallest and largest global episode seed used by any rollout so far.
    pub fn seed_range(&self) -> Option<(u64, u64)> {
        self.seed_range
    }

    pub fn budget_exhausted(&self) -> bool {
        self.steps_done >= self.cfg.total_steps
    }

    pub fn into_parts(self) -> (PolicyParams, PopArtState, AdamState) {
        (self.params, self.popart, self.adam)
    }

    /// Runs updates until the step budget is spent.
    pub fn run(&mut self, mut on_update: impl FnMut(&UpdateMetrics)) -> Result<(), TrainError> {
        while !self.budget_exhausted() {
            let m = self.update()?;
            on_update(&m);
        }
        Ok(())
    }

    pub fn update(&mut self) -> Result<UpdateMetrics, TrainError> {
        let lr = self.cfg.lr_at(self.steps_done);
        let buf = self.collector.collect(&self.params, &self.popart, self.cfg.rollout_len)?;
        self.account(&buf);
        let prepared = self.prepare(&buf);

        let mut reports = Vec::new();
        for epoch in 0..self.cfg.ppo_epochs {
            for (k, rows) in self.minibatch_rows(&buf).into_iter().enumerate() {
                let mb = build_minibatch(&buf, &prepared, &rows);
                let (report, grads) = minibatch_loss(&self.params, &mb, &self.cfg, true)?;
                let mut grads = grads.expect("gradient requested");
                if !report.is_finite() || !grads.is_finite() {
                    return Err(TrainError::NonFinite(Box::new(NanDump {
                        update: self.updates + self.update_offset + 1,
                        epoch,
                        minibatch_index: k,
                        report,
                        minibatch: mb,
                    })));
                }
                let gap = report.decomposition_error();
                if gap > DECOMPOSITION_TOL * report.total.abs().max(1.0) {
                    return Err(TrainError::Invariant(format!("loss parts differ from total by {gap:e}")));
                }
                if let Some(max) = self.cfg.max_grad_norm {
                    let norm = grads.norm();
                    if norm > max {
                        grads.scale(max / norm);
                    }
                }
                self.adam.step(self.params.as_mut_slice(), grads.as_slice(), lr)?;
                reports.push(report);
            }
        }
        self.updates += 1;
        Ok(self.metrics(&reports, lr))
    }

    fn account(&mut self, buf: &RolloutBuffer) {
        self.steps_done += buf.len() as u64;
        for t in &buf.env_tasks {
            self.steps_per_task[t.index()] += buf.horizon as u64;
        }
        for ep in &buf.finished {
            self.windows.add(ep);
        }
        for &s in &buf.seeds_seen {
            self.seed_range = Some(match self.seed_range {
                None => (s, s),
                Some((lo, hi)) => (lo.min(s), hi.max(s)),
            });
        }
    }

    /// GAE on the raw reward scale, return-statistics update, then targets
    /// and advantages expressed on each task's normalized scale.
    fn prepare(&mut self, buf: &RolloutBuffer) -> PreparedBatch {
        let h = buf.horizon;
        let mut adv = vec![0.0; buf.len()];
        let mut ret = vec![0.0; buf.len()];
        for e in 0..buf.env_tasks.len() {
            let r = e * h..(e + 1) * h;
            let (a, g) = compute_gae(
                &buf.rewards[r.clone()],
                &buf.values[r.clone()],
                &buf.dones[r.clone()],
                buf.bootstrap[e],
                self.cfg.gamma,
                self.cfg.gae_lambda,
            );
            adv[r.clone()].copy_from_slice(&a);
            ret[r].copy_from_slice(&g);
        }
        for task in TaskId::ALL {
            let returns: Vec<f64> = buf.rows_of(task).map(|r| ret[r]).collect();
            self.popart.update(task.index(), &returns, &mut self.params);
        }
        let mut targets = vec![0.0; buf.len()];
        for r in 0..buf.len() {
            let i = buf.row_task(r).index();
            targets[r] = self.popart.normalize(i, ret[r]);
            adv[r] /= self.popart.sigma(i);
        }
        PreparedBatch { advantages: adv, targets }
    }

    /// Each minibatch takes an equal share of every task's shuffled rows.
    fn minibatch_rows(&mut self, buf: &RolloutBuffer) -> Vec<Vec<usize>> {
        let k = self.cfg.minibatches;
        let mut out = vec![Vec::new(); k];
        for task in TaskId::ALL {
            let mut rows: Vec<usize> = buf.rows_of(task).collect();
            if rows.is_empty() {
                continue;
            }
            rows.shuffle(&mut self.shuffle_rng);
            let chunk = rows.len().div_ceil(k);
            for (i, c) in rows.chunks(chunk).enumerate() {
                out[i].extend_from_slice(c);
            }
        }
        out.retain(|m| !m.is_empty());
        out
    }

    fn metrics(&self, reports: &[LossReport], lr: f64) -> UpdateMetrics {
        let n = reports.len().max(1) as f64;
        let active = self.cfg.active_tasks();
        let per_task_mean = |f: &dyn Fn(&LossReport, usize) -> f64| {
            reports
                .iter()
                .map(|r| active.iter().map(|t| f(r, t.index())).sum::<f64>() / active.len() as f64)
                .sum::<f64>()
                / n
        };
        UpdateMetrics {
            update: self.updates + self.update_offset,
            env_steps: self.steps_done + self.step_offset,
            steps_per_task: self.steps_per_task,
            success: self.windows.success(),
            success_main_easy: self.windows.main_easy(),
            success_main_hard: self.windows.main_hard(),
            mean_return: self.windows.mean_return(),
            policy_loss: per_task_mean(&|r, i| r.per_task[i].policy),
            value_loss: per_task_mean(&|r, i| r.per_task[i].value),
            entropy: per_task_mean(&|r, i| r.per_task[i].entropy),
            distill_loss: reports.iter().map(|r| r.distill).sum::<f64>() / n,
            total_loss: reports.iter().map(|r| r.total).sum::<f64>() / n,
            lr,
            wall_time: self.started.elapsed().as_secs_f64(),
        }
    }
}

fn build_minibatch(buf: &RolloutBuffer, prep: &PreparedBatch, rows: &[usize]) -> Minibatch {
    Minibatch {
        obs: buf.obs.select_rows(rows),
        tasks: rows.iter().map(|r| buf.row_task(*r)).collect(),
        actions: rows.iter().map(|r| buf.actions[*r]).collect(),
        old_log_probs: rows.iter().map(|r| buf.log_probs[*r]).collect(),
        advantages: rows.iter().map(|r| prep.advantages[*r]).collect(),
        value_targets: rows.iter().map(|r| prep.targets[*r]).collect(),
        relevance: rows.iter().map(|r| buf.relevance[*r]).collect(),
    }
}

/// Result of a complete training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub popart: PopArtState,
    pub adam: AdamState,
    pub metrics: Vec<UpdateMetrics>,
    pub seed_range: Option<(u64, u64)>,
}

/// Trains from scratch until `cfg.total_steps` environment steps are spent.
pub fn train(cfg: TrainConfig, seed: u64) -> Result<TrainOutcome, TrainError> {
    let mut trainer = Trainer::new(cfg, seed)?;
    let mut metrics = Vec::new();
    trainer.run(|m| metrics.push(m.clone()))?;
    let seed_range = trainer.seed_range();
    let (params, popart, adam) = trainer.into_parts();
    Ok(TrainOutcome { params, popart, adam, metrics, seed_range })
}
