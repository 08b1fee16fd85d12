use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Cell, Grid};
use super::EnvError;

/// Train episodes come from `[0, TRAIN_SEEDS)`, eval episodes from
/// `[TRAIN_SEEDS, TRAIN_SEEDS + EVAL_SEEDS)`.
pub const TRAIN_SEEDS: u64 = 1_000_000;
pub const EVAL_SEEDS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    /// Maps a caller seed onto the split's reserved global seed range.
    pub fn global_seed(self, seed: u64) -> u64 {
        match self {
            Split::Train => seed % TRAIN_SEEDS,
            Split::Eval => TRAIN_SEEDS + seed % EVAL_SEEDS,
        }
    }

    pub fn contains(self, global_seed: u64) -> bool {
        match self {
            Split::Train => global_seed < TRAIN_SEEDS,
            Split::Eval => (TRAIN_SEEDS..TRAIN_SEEDS + EVAL_SEEDS).contains(&global_seed),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = EnvError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            _ => Err(EnvError::Parse(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    /// Object starts in the open.
    Easy,
    /// Object starts inside the closed container.
    Hard,
}

impl Difficulty {
    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Difficulty {
    type Err = EnvError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "hard" => Ok(Difficulty::Hard),
            _ => Err(EnvError::Parse(format!("unknown difficulty {s:?}"))),
        }
    }
}

/// One episode layout. `seed` is the global seed (already mapped into the
/// split's range).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub seed: u64,
    pub split: Split,
    pub difficulty: Difficulty,
    pub object_start: Cell,
    pub object_in_container: bool,
    pub agent_spawn: Cell,
}

impl EpisodeConfig {
    pub fn is_hard(&self) -> bool {
        self.difficulty == Difficulty::Hard
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), EnvError> {
        let spec = grid.spec();
        let bad = |m: &str| Err(EnvError::InvalidEpisode(format!("seed {}: {m}", self.seed)));
        if !self.split.contains(self.seed) {
            return bad("seed outside the split's range");
        }
        if self.is_hard() != self.object_in_container {
            return bad("hard episodes and only hard episodes start with the object in the container");
        }
        if self.object_in_container && self.object_start != spec.container_cell {
            return bad("object_in_container but object_start is not the container cell");
        }
        if !grid.passable(self.object_start) || !grid.passable(self.agent_spawn) {
            return bad("object or spawn cell is not a free cell");
        }
        if !self.object_in_container
            && (self.object_start == spec.container_cell || self.object_start == spec.goal_cell)
        {
            return bad("easy object cannot start on the container or goal");
        }
        Ok(())
    }
}

/// Deterministic episode sampler. Half of the episodes are hard on average.
pub fn generate_episode(grid: &Grid, seed: u64, split: Split) -> EpisodeConfig {
    let global = split.global_seed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(global);
    let spec = grid.spec();
    let difficulty = if rng.gen_bool(0.5) { Difficulty::Hard } else { Difficulty::Easy };
    let object_start = match difficulty {
        Difficulty::Hard => spec.container_cell,
        Difficulty::Easy => *pick(&mut rng, grid, |c| c != spec.container_cell && c != spec.goal_cell),
    };
    let agent_spawn =
        *pick(&mut rng, grid, |c| c != spec.container_cell && c != spec.goal_cell && c.chebyshev(object_start) >= 2);
    EpisodeConfig {
        seed: global,
        split,
        difficulty,
        object_start,
        object_in_container: difficulty == Difficulty::Hard,
        agent_spawn,
    }
}

fn pick<'g>(rng: &mut ChaCha8Rng, grid: &'g Grid, keep: impl Fn(Cell) -> bool) -> &'g Cell {
    let candidates: Vec<&Cell> = grid.free_cells().iter().filter(|c| keep(**c)).collect();
    candidates.choose(rng).expect("grid has no candidate cells")
}

/// The first `n` episodes of `split` with the given difficulty, scanning
/// caller seeds `0, 1, 2, ...`.
pub fn episodes_of(grid: &Grid, split: Split, difficulty: Difficulty, n: usize) -> Vec<EpisodeConfig> {
    (0u64..).map(|s| generate_episode(grid, s, split)).filter(|e| e.difficulty == difficulty).take(n).collect()
}
