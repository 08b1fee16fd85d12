use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{generate_episode, Difficulty, EnvState, MiniRearrange, Split, TaskId, OBS_DIM, TRAIN_SEEDS};
use crate::nn::{forward, sample_action, PolicyParams, Tensor2};
use crate::relevance::{relevance, RelevanceVector};

use super::popart::PopArtState;
use super::TrainError;

/// Independent RNG stream `stream` of a run seeded with `seed`.
pub fn derive_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws train-split episodes until one fits `task`.
pub fn sample_episode(env: &MiniRearrange, task: TaskId, rng: &mut ChaCha8Rng) -> crate::env::EpisodeConfig {
    loop {
        let ep = generate_episode(env.grid(), rng.gen_range(0..TRAIN_SEEDS), Split::Train);
        let ok = match task {
            TaskId::PICK => ep.difficulty == Difficulty::Easy,
            TaskId::PICK_FROM_CONTAINER => ep.difficulty == Difficulty::Hard,
            _ => true,
        };
        if ok {
            return ep;
        }
    }
}

/// One environment instance owned by the collector.
#[derive(Debug, Clone)]
pub struct EnvSlot {
    pub task: TaskId,
    pub state: EnvState,
    obs: Vec<f64>,
    rng: ChaCha8Rng,
    episode_return: f64,
}

impl EnvSlot {
    pub fn new(env: &MiniRearrange, task: TaskId, mut rng: ChaCha8Rng) -> Result<Self, TrainError> {
        let ep = sample_episode(env, task, &mut rng);
        let (state, obs) = env.reset(task, &ep)?;
        Ok(EnvSlot { task, state, obs: obs.to_vec(), rng, episode_return: 0.0 })
    }

    fn reset(&mut self, env: &MiniRearrange) -> Result<(), TrainError> {
        let ep = sample_episode(env, self.task, &mut self.rng);
        let (state, obs) = env.reset(self.task, &ep)?;
        self.state = state;
        self.obs = obs.to_vec();
        self.episode_return = 0.0;
        Ok(())
    }
}

/// A finished episode seen during collection.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub task: TaskId,
    pub difficulty: Difficulty,
    pub seed: u64,
    pub success: bool,
    pub episode_return: f64,
}

/// Trajectories of one collection phase. Row `env * horizon + t` holds step
/// `t` of environment `env`.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    pub horizon: usize,
    pub env_tasks: Vec<TaskId>,
    pub obs: Tensor2,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Denormalized prediction of each row's own value slot.
    pub values: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Main-task rows only.
    pub relevance: Vec<Option<RelevanceVector>>,
    /// Main-task rows only.
    pub states: Vec<Option<EnvState>>,
    /// Denormalized value of the state after the last step, per env.
    pub bootstrap: Vec<f64>,
    pub finished: Vec<EpisodeRecord>,
    /// Global seeds of every episode that ran during this phase.
    pub seeds_seen: Vec<u64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn row_task(&self, row: usize) -> TaskId {
        self.env_tasks[row / self.horizon]
    }

    pub fn rows_of(&self, task: TaskId) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |r| self.row_task(*r) == task)
    }
}

/// The environment instances of a run and their collection loop.
#[derive(Debug, Clone)]
pub struct Collector {
    env: MiniRearrange,
    pub slots: Vec<EnvSlot>,
    relevant: Vec<TaskId>,
}

impl Collector {
    /// `slot_counts` gives environment instances per task; `relevant` lists the
    /// auxiliary tasks whose relevance weights are kept.
    pub fn new(
        env: MiniRearrange,
        slot_counts: &[(TaskId, usize)],
        relevant: Vec<TaskId>,
        seed: u64,
    ) -> Result<Self, TrainError> {
        let mut slots = Vec::new();
        for &(task, n) in slot_counts {
            for _ in 0..n {
                let stream = 1000 + slots.len() as u64;
                slots.push(EnvSlot::new(&env, task, derive_rng(seed, stream))?);
            }
        }
        Ok(Collector { env, slots, relevant })
    }

    pub fn env(&self) -> &MiniRearrange {
        &self.env
    }

    /// Advances every slot `horizon` steps under a frozen policy, resetting
    /// finished episodes with fresh train-split layouts.
    pub fn collect(
        &mut self,
        params: &PolicyParams,
        popart: &PopArtState,
        horizon: usize,
    ) -> Result<RolloutBuffer, TrainError> {
        let n_envs = self.slots.len();
        let rows = n_envs * horizon;
        let mut buf = RolloutBuffer {
            horizon,
            env_tasks: self.slots.iter().map(|s| s.task).collect(),
            obs: Tensor2::zeros(rows, OBS_DIM),
            actions: vec![0; rows],
            rewards: vec![0.0; rows],
            dones: vec![false; rows],
            values: vec![0.0; rows],
            log_probs: vec![0.0; rows],
            relevance: vec![None; rows],
            states: vec![None; rows],
            bootstrap: vec![0.0; n_envs],
            finished: Vec::new(),
            seeds_seen: self.slots.iter().map(|s| s.state.episode.seed).collect(),
        };
        let mut batch = Tensor2::zeros(n_envs, OBS_DIM);
        for t in 0..horizon {
            for (e, slot) in self.slots.iter().enumerate() {
                batch.row_mut(e).copy_from_slice(&slot.obs);
            }
            let (out, _) = forward(params, &batch)?;
            for (e, slot) in self.slots.iter_mut().enumerate() {
                let row = e * horizon + t;
                let task = slot.task;
                let (action, log_prob) = sample_action(out.logits.row(e), &mut slot.rng);
                buf.obs.row_mut(row).copy_from_slice(&slot.obs);
                buf.actions[row] = action;
                buf.log_probs[row] = log_prob;
                buf.values[row] = popart.denormalize(task.index(), out.values.get(e, task.index()));
                if task.is_main() {
                    let w = relevance(&self.env, &slot.state)
                        .map_err(|e| TrainError::Invariant(e.to_string()))?
                        .masked(|t| self.relevant.contains(&t));
                    buf.relevance[row] = Some(w);
                    buf.states[row] = Some(slot.state.clone());
                }
                let step = self.env.step(&slot.state, action)?;
                slot.episode_return += step.reward;
                buf.rewards[row] = step.reward;
                buf.dones[row] = step.done;
                if step.done {
                    buf.finished.push(EpisodeRecord {
                        task,
                        difficulty: slot.state.episode.difficulty,
                        seed: slot.state.episode.seed,
                        success: step.success,
                        episode_return: slot.episode_return,
                    });
                    slot.reset(&self.env)?;
                    buf.seeds_seen.push(slot.state.episode.seed);
                } else {
                    slot.state = step.next_state;
                    slot.obs = step.observation.to_vec();
                }
            }
        }
        for (e, slot) in self.slots.iter().enumerate() {
            batch.row_mut(e).copy_from_slice(&slot.obs);
        }
        let (out, _) = forward(params, &batch)?;
        for (e, slot) in self.slots.iter().enumerate() {
            let i = slot.task.index();
            buf.bootstrap[e] = popart.denormalize(i, out.values.get(e, i));
        }
        Ok(buf)
    }
}
