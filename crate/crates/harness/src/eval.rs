//! Greedy evaluation of a policy (or a scripted/random actor) on reserved
//! episode seeds.

use auxdistill_core::env::{
    episodes_of, Difficulty, EnvState, MiniRearrange, ScriptedExpert, Split, TaskId, NUM_ACTIONS,
};
use auxdistill_core::nn::{argmax, forward, sample_action, PolicyParams, Tensor2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub trait Actor {
    fn act(&mut self, state: &EnvState, obs: &[f64]) -> usize;
}

/// Argmax action of a trained network.
pub struct GreedyPolicy<'a> {
    params: &'a PolicyParams,
}

impl<'a> GreedyPolicy<'a> {
    pub fn new(params: &'a PolicyParams) -> Self {
        GreedyPolicy { params }
    }
}

impl Actor for GreedyPolicy<'_> {
    fn act(&mut self, _state: &EnvState, obs: &[f64]) -> usize {
        let x = Tensor2::from_vec(1, obs.len(), obs.to_vec());
        let (out, _) = forward(self.params, &x).expect("observation width matches the network");
        argmax(out.logits.row(0))
    }
}

/// Actions drawn from the policy's softmax, as during training rollouts.
pub struct SampledPolicy<'a> {
    params: &'a PolicyParams,
    rng: ChaCha8Rng,
}

impl<'a> SampledPolicy<'a> {
    pub fn new(params: &'a PolicyParams, seed: u64) -> Self {
        SampledPolicy { params, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Actor for SampledPolicy<'_> {
    fn act(&mut self, _state: &EnvState, obs: &[f64]) -> usize {
        let x = Tensor2::from_vec(1, obs.len(), obs.to_vec());
        let (out, _) = forward(self.params, &x).expect("observation width matches the network");
        sample_action(out.logits.row(0), &mut self.rng).0
    }
}

/// How a trained policy picks actions during evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalAction {
    /// Argmax of the logits.
    #[default]
    Greedy,
    /// Sampled from the softmax with a seeded RNG.
    Sample,
}

impl EvalAction {
    pub fn name(self) -> &'static str {
        match self {
            EvalAction::Greedy => "greedy",
            EvalAction::Sample => "sample",
        }
    }
}

impl std::str::FromStr for EvalAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(EvalAction::Greedy),
            "sample" => Ok(EvalAction::Sample),
            other => Err(format!("unknown eval action {other:?} (expected greedy or sample)")),
        }
    }
}

pub struct ExpertActor(pub ScriptedExpert);

impl Actor for ExpertActor {
    fn act(&mut self, state: &EnvState, _obs: &[f64]) -> usize {
        self.0.act(state)
    }
}

pub struct RandomActor(ChaCha8Rng);

impl RandomActor {
    pub fn new(seed: u64) -> Self {
        RandomActor(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl Actor for RandomActor {
    fn act(&mut self, _state: &EnvState, _obs: &[f64]) -> usize {
        self.0.gen_range(0..NUM_ACTIONS)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCell {
    pub successes: usize,
    pub episodes: usize,
}

impl EvalCell {
    pub fn rate(&self) -> f64 {
        if self.episodes == 0 {
            f64::NAN
        } else {
            self.successes as f64 / self.episodes as f64
        }
    }

    pub fn merge(self, other: EvalCell) -> EvalCell {
        EvalCell { successes: self.successes + other.successes, episodes: self.episodes + other.episodes }
    }
}

/// Runs `task` on the first `n` episodes of `difficulty` in `split`.
/// Incompatible task/difficulty pairs yield an empty cell.
pub fn evaluate_task(
    env: &MiniRearrange,
    actor: &mut dyn Actor,
    task: TaskId,
    split: Split,
    difficulty: Difficulty,
    n: usize,
) -> EvalCell {
    let mut cell = EvalCell::default();
    for ep in episodes_of(env.grid(), split, difficulty, n) {
        let Ok((mut state, obs)) = env.reset(task, &ep) else {
            continue;
        };
        let mut obs = obs.to_vec();
        let mut success = false;
        while !env.is_done(&state) {
            let a = actor.act(&state, &obs);
            let r = env.step(&state, a).expect("action in range on a live episode");
            success = r.success;
            obs = r.observation.to_vec();
            state = r.next_state;
        }
        cell.episodes += 1;
        cell.successes += usize::from(success);
    }
    cell
}

/// Main-task success on the first `n` episodes of `difficulty` in `split`.
pub fn evaluate(
    env: &MiniRearrange,
    actor: &mut dyn Actor,
    split: Split,
    difficulty: Difficulty,
    n: usize,
) -> EvalCell {
    evaluate_task(env, actor, TaskId::MAIN, split, difficulty, n)
}
