use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::episode::{Difficulty, EpisodeConfig};
use super::grid::{Cell, Grid, GridWorldSpec};
use super::state::{Action, EnvState, Observation, StageInfo, StepResult};
use super::task::TaskId;
use super::EnvError;

/// Bonus for reaching a task's success condition.
pub const SUCCESS_BONUS: f64 = 10.0;
/// Bonus the step the container is first opened.
pub const OPEN_BONUS: f64 = 5.0;
/// Bonus the step the object is first picked.
pub const PICK_BONUS: f64 = 2.0;
/// Coefficient on geodesic progress toward the current subgoal.
pub const SHAPING: f64 = 0.1;
/// Chebyshev radius within which the container's open flag is sensed.
pub const SENSE_RADIUS: i32 = 2;

/// The MiniRearrange simulator. Stateless apart from the shared layout;
/// episodes are threaded through explicit [`EnvState`] values.
#[derive(Debug, Clone)]
pub struct MiniRearrange {
    grid: Arc<Grid>,
}

impl MiniRearrange {
    pub fn new(spec: GridWorldSpec) -> Result<Self, EnvError> {
        Ok(MiniRearrange { grid: Arc::new(Grid::new(spec)?) })
    }

    pub fn from_grid(grid: Arc<Grid>) -> Self {
        MiniRearrange { grid }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spec(&self) -> &GridWorldSpec {
        self.grid.spec()
    }

    pub fn max_steps(&self, task: TaskId) -> u32 {
        if task.is_main() {
            self.spec().max_steps_main
        } else {
            self.spec().max_steps_aux
        }
    }

    pub fn generate_episode(&self, seed: u64, split: super::Split) -> EpisodeConfig {
        super::episode::generate_episode(&self.grid, seed, split)
    }

    pub fn reset(&self, task: TaskId, episode: &EpisodeConfig) -> Result<(EnvState, Observation), EnvError> {
        episode.validate(&self.grid)?;
        let hard = episode.is_hard();
        let incompatible = (task == TaskId::PICK && hard) || (task == TaskId::PICK_FROM_CONTAINER && !hard);
        if incompatible {
            return Err(EnvError::IncompatibleEpisode { task, difficulty: episode.difficulty });
        }
        let mut state = EnvState {
            agent_pos: episode.agent_spawn,
            object_pos: episode.object_start,
            holding: false,
            container_open: !hard,
            did_pick: false,
            step_count: 0,
            task,
            episode: episode.clone(),
            spawn: episode.agent_spawn,
        };
        match task {
            TaskId::PLACE => {
                state.holding = true;
                state.did_pick = true;
                state.object_pos = state.agent_pos;
            }
            TaskId::OPEN_CONTAINER => state.container_open = false,
            TaskId::PICK_FROM_CONTAINER => {
                state.container_open = true;
                state.agent_pos = self.spawn_near_container(episode.seed);
                state.spawn = state.agent_pos;
            }
            _ => {}
        }
        let obs = self.observe(&state);
        Ok((state, obs))
    }

    fn spawn_near_container(&self, seed: u64) -> Cell {
        let container = self.spec().container_cell;
        let near: Vec<Cell> = self
            .grid
            .free_cells()
            .iter()
            .copied()
            .filter(|c| *c != container && c.chebyshev(container) <= SENSE_RADIUS)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de);
        *near.choose(&mut rng).expect("container has free neighbours")
    }

    pub fn observe(&self, state: &EnvState) -> Observation {
        let spec = self.spec();
        let (w, h) = (spec.width as f64, spec.height as f64);
        let rel = |to: Cell| [(to.x - state.spawn.x) as f64 / w, (to.y - state.spawn.y) as f64 / h];
        let sensed = state.agent_pos.chebyshev(spec.container_cell) <= SENSE_RADIUS && state.container_open;
        Observation {
            agent_pos_norm: [state.agent_pos.x as f64 / (w - 1.0), state.agent_pos.y as f64 / (h - 1.0)],
            object_start_rel: rel(state.episode_object_start()),
            goal_rel: rel(spec.goal_cell),
            holding: f64::from(u8::from(state.holding)),
            container_open_sensed: f64::from(u8::from(sensed)),
            task_indicator: state.task.indicator(),
        }
    }

    /// Object sitting in the container cell.
    pub fn object_in_container(&self, state: &EnvState) -> bool {
        !state.holding && state.object_pos == self.spec().container_cell
    }

    /// Whether the object can be picked up, ignoring agent position.
    pub fn object_accessible(&self, state: &EnvState) -> bool {
        !self.object_in_container(state) || state.container_open
    }

    pub fn is_success(&self, state: &EnvState) -> bool {
        match state.task {
            TaskId::MAIN | TaskId::PLACE => state.object_pos == self.spec().goal_cell && !state.holding,
            TaskId::OPEN_CONTAINER => state.container_open,
            _ => state.did_pick,
        }
    }

    pub fn is_done(&self, state: &EnvState) -> bool {
        self.is_success(state) || state.step_count >= self.max_steps(state.task)
    }

    pub fn step(&self, state: &EnvState, action: usize) -> Result<StepResult, EnvError> {
        if self.is_done(state) {
            return Err(EnvError::EpisodeDone);
        }
        let action = Action::from_index(action).ok_or(EnvError::InvalidAction(action))?;
        let spec = self.spec();
        let mut next = state.clone();
        let mut info = StageInfo::default();
        match action {
            Action::Open => {
                if !next.container_open && next.agent_pos.chebyshev(spec.container_cell) <= 1 {
                    next.container_open = true;
                    info.opened = true;
                }
            }
            Action::Pick => {
                if !next.holding && next.agent_pos.chebyshev(next.object_pos) <= 1 && self.object_accessible(&next) {
                    next.holding = true;
                    next.did_pick = true;
                    next.object_pos = next.agent_pos;
                    info.picked = true;
                }
            }
            Action::Place => {
                let can_place = matches!(next.task, TaskId::MAIN | TaskId::PLACE);
                if can_place && next.holding && next.agent_pos.chebyshev(spec.goal_cell) <= 1 {
                    next.holding = false;
                    next.object_pos = spec.goal_cell;
                    info.placed = true;
                }
            }
            mv => {
                let (dx, dy) = mv.delta().expect("movement action");
                let to = next.agent_pos.offset(dx, dy);
                if self.grid.passable(to) {
                    next.agent_pos = to;
                    if next.holding {
                        next.object_pos = to;
                    }
                }
            }
        }
        next.step_count += 1;
        let reward = if next.task.is_main() {
            self.reward_main(state, &next)
        } else {
            self.reward_aux(next.task, state, &next)?
        };
        let success = self.is_success(&next);
        let done = success || next.step_count >= self.max_steps(next.task);
        let observation = self.observe(&next);
        Ok(StepResult { next_state: next, observation, reward, done, success, stage_info: info })
    }

    /// Cell the main task is currently working toward.
    pub fn main_subgoal(&self, state: &EnvState) -> Cell {
        let spec = self.spec();
        if state.holding {
            spec.goal_cell
        } else if self.object_in_container(state) && !state.container_open {
            spec.container_cell
        } else {
            state.object_pos
        }
    }

    /// Cell an auxiliary task is working toward, if its stage is still open.
    pub fn aux_subgoal(&self, task: TaskId, state: &EnvState) -> Option<Cell> {
        let spec = self.spec();
        match task {
            TaskId::PICK | TaskId::PICK_FROM_CONTAINER => (!state.holding).then_some(state.object_pos),
            TaskId::PLACE => state.holding.then_some(spec.goal_cell),
            TaskId::OPEN_CONTAINER => (!state.container_open).then_some(spec.container_cell),
            _ => None,
        }
    }

    fn shaping(&self, subgoal: Option<Cell>, prev: &EnvState, next: &EnvState) -> f64 {
        subgoal.map_or(0.0, |g| {
            let before = f64::from(self.grid.distance(prev.agent_pos, g));
            let after = f64::from(self.grid.distance(next.agent_pos, g));
            SHAPING * (before - after)
        })
    }

    fn event_bonus(prev: &EnvState, next: &EnvState) -> f64 {
        let mut r = 0.0;
        if !prev.container_open && next.container_open {
            r += OPEN_BONUS;
        }
        if !prev.did_pick && next.did_pick {
            r += PICK_BONUS;
        }
        r
    }

    /// Main-task reward: success bonus, first-open and first-pick bonuses,
    /// and shaping toward the subgoal of `prev`.
    pub fn reward_main(&self, prev: &EnvState, next: &EnvState) -> f64 {
        let mut r = Self::event_bonus(prev, next);
        if self.is_success(next) {
            r += SUCCESS_BONUS;
        }
        r + self.shaping(Some(self.main_subgoal(prev)), prev, next)
    }

    pub fn reward_aux(&self, task: TaskId, prev: &EnvState, next: &EnvState) -> Result<f64, EnvError> {
        if task.is_main() {
            return Err(EnvError::NotAuxiliary(task));
        }
        let mut r = 0.0;
        // Only the task's own stage event earns a bonus.
        match task {
            TaskId::PICK | TaskId::PICK_FROM_CONTAINER if !prev.did_pick && next.did_pick => r += PICK_BONUS,
            TaskId::OPEN_CONTAINER if !prev.container_open && next.container_open => r += OPEN_BONUS,
            _ => {}
        }
        let success = match task {
            TaskId::PLACE => next.object_pos == self.spec().goal_cell && !next.holding,
            TaskId::OPEN_CONTAINER => next.container_open,
            _ => next.did_pick,
        };
        if success {
            r += SUCCESS_BONUS;
        }
        Ok(r + self.shaping(self.aux_subgoal(task, prev), prev, next))
    }
}

impl EnvState {
    pub fn episode_object_start(&self) -> Cell {
        if self.task == TaskId::PLACE {
            // The object starts in the gripper.
            self.spawn
        } else {
            self.episode.object_start
        }
    }

    pub fn difficulty(&self) -> Difficulty {
        self.episode.difficulty
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::episode::episodes_of;
    use crate::env::Split;

    fn env() -> MiniRearrange {
        MiniRearrange::new(GridWorldSpec::default()).unwrap()
    }

    fn easy(env: &MiniRearrange) -> EpisodeConfig {
        episodes_of(env.grid(), Split::Train, Difficulty::Easy, 1).remove(0)
    }

    fn hard(env: &MiniRearrange) -> EpisodeConfig {
        episodes_of(env.grid(), Split::Train, Difficulty::Hard, 1).remove(0)
    }

    #[test]
    fn reset_start_distributions() {
        let env = env();
        let (e, h) = (easy(&env), hard(&env));

        let (s, _) = env.reset(TaskId::PLACE, &h).unwrap();
        assert!(s.holding && s.object_pos == s.agent_pos);

        let (s, _) = env.reset(TaskId::MAIN, &e).unwrap();
        assert!(s.container_open && !s.holding);

        let (s, _) = env.reset(TaskId::MAIN, &h).unwrap();
        assert!(!s.container_open);
        assert_eq!(s.object_pos, env.spec().container_cell);

        let (s, _) = env.reset(TaskId::OPEN_CONTAINER, &e).unwrap();
        assert!(!s.container_open && !s.holding);

        let (s, _) = env.reset(TaskId::PICK_FROM_CONTAINER, &h).unwrap();
        assert!(s.container_open);
        assert!(s.agent_pos.chebyshev(env.spec().container_cell) <= 2);
        assert_eq!(s.object_pos, env.spec().container_cell);
    }

    #[test]
    fn reset_rejects_incompatible_layouts() {
        let env = env();
        assert!(matches!(env.reset(TaskId::PICK, &hard(&env)), Err(EnvError::IncompatibleEpisode { .. })));
        assert!(matches!(
            env.reset(TaskId::PICK_FROM_CONTAINER, &easy(&env)),
            Err(EnvError::IncompatibleEpisode { .. })
        ));
    }

    fn state_at(env: &MiniRearrange, task: TaskId, ep: &EpisodeConfig, agent: Cell) -> EnvState {
        let (mut s, _) = env.reset(task, ep).unwrap();
        s.agent_pos = agent;
        s.spawn = agent;
        if s.holding {
            s.object_pos = agent;
        }
        s
    }

    #[test]
    fn blocked_move_has_zero_reward() {
        let env = env();
        let ep = easy(&env);
        // (3,4) is west of the wall cell (4,4).
        let s = state_at(&env, TaskId::MAIN, &ep, Cell::new(3, 4));
        let r = env.step(&s, Action::East.index()).unwrap();
        assert_eq!(r.next_state.agent_pos, s.agent_pos);
        assert_eq!(r.reward, 0.0);
        // Out of bounds.
        let s = state_at(&env, TaskId::MAIN, &ep, Cell::new(0, 8));
        let r = env.step(&s, Action::West.index()).unwrap();
        assert_eq!(r.next_state.agent_pos, s.agent_pos);
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn pick_and_place_bonuses() {
        let env = env();
        let ep = easy(&env);
        let obj = ep.object_start;
        let free_nb = crate::env::grid::MOVES
            .iter()
            .map(|(dx, dy)| obj.offset(*dx, *dy))
            .find(|c| env.grid().passable(*c))
            .unwrap();
        let s = state_at(&env, TaskId::MAIN, &ep, free_nb);
        let r = env.step(&s, Action::Pick.index()).unwrap();
        assert!(r.next_state.holding && r.stage_info.picked);
        assert!((r.reward - PICK_BONUS).abs() < 1e-12);

        let goal = env.spec().goal_cell;
        let s = state_at(&env, TaskId::MAIN, &ep, goal.offset(-1, 0));
        let mut s = s;
        s.holding = true;
        s.did_pick = true;
        s.object_pos = s.agent_pos;
        let r = env.step(&s, Action::Place.index()).unwrap();
        assert!(r.success && r.done && r.stage_info.placed);
        assert!((r.reward - SUCCESS_BONUS).abs() < 1e-12);
    }

    #[test]
    fn open_container_task_bonus() {
        let env = env();
        let c = env.spec().container_cell;
        let s = state_at(&env, TaskId::OPEN_CONTAINER, &hard(&env), c.offset(1, 1));
        let r = env.step(&s, Action::Open.index()).unwrap();
        assert!(r.success);
        assert!((r.reward - 15.0).abs() < 1e-12);
    }

    #[test]
    fn pick_blocked_by_closed_container() {
        let env = env();
        let c = env.spec().container_cell;
        let s = state_at(&env, TaskId::MAIN, &hard(&env), c.offset(1, 0));
        let r = env.step(&s, Action::Pick.index()).unwrap();
        assert!(!r.next_state.holding);
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn stepping_a_done_state_is_an_error() {
        let env = env();
        let (mut s, _) = env.reset(TaskId::MAIN, &easy(&env)).unwrap();
        s.step_count = env.spec().max_steps_main;
        assert!(matches!(env.step(&s, 0), Err(EnvError::EpisodeDone)));
        let (s, _) = env.reset(TaskId::MAIN, &easy(&env)).unwrap();
        assert!(matches!(env.step(&s, 7), Err(EnvError::InvalidAction(7))));
    }

    #[test]
    fn timeout_ends_episode() {
        let env = env();
        let (mut s, _) = env.reset(TaskId::PICK, &easy(&env)).unwrap();
        s.step_count = env.spec().max_steps_aux - 1;
        let r = env.step(&s, Action::Open.index()).unwrap();
        assert!(r.done && !r.success);
    }

    #[test]
    fn container_flag_only_sensed_nearby() {
        let env = env();
        let c = env.spec().container_cell;
        let ep = easy(&env);
        let near = state_at(&env, TaskId::MAIN, &ep, c.offset(2, 2));
        let far = state_at(&env, TaskId::MAIN, &ep, c.offset(3, 0));
        assert_eq!(env.observe(&near).container_open_sensed, 1.0);
        assert_eq!(env.observe(&far).container_open_sensed, 0.0);
    }

    #[test]
    fn reward_aux_rejects_main() {
        let env = env();
        let (s, _) = env.reset(TaskId::MAIN, &easy(&env)).unwrap();
        assert!(env.reward_aux(TaskId::MAIN, &s, &s).is_err());
        assert_eq!(env.reward_aux(TaskId::PICK, &s, &s).unwrap(), 0.0);
    }
}
