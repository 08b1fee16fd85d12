use auxdistill_core::env::{
    Cell, Difficulty, EnvState, EpisodeConfig, GridWorldSpec, MiniRearrange, ScriptedExpert, Split, TaskId, NUM_ACTIONS,
};
use auxdistill_core::relevance::{relevance, RelevanceError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small() -> MiniRearrange {
    MiniRearrange::new(GridWorldSpec {
        width: 5,
        height: 5,
        container_cell: Cell::new(1, 1),
        goal_cell: Cell::new(3, 3),
        walls: vec![Cell::new(2, 2)],
        max_steps_main: 40,
        max_steps_aux: 20,
    })
    .unwrap()
}

/// Every main-task state on the grid: agent anywhere, object held, in the
/// container (open or closed), or loose on any free cell with the container
/// in either state.
fn all_states(env: &MiniRearrange) -> Vec<EnvState> {
    let spec = env.spec().clone();
    let cells = env.grid().free_cells().to_vec();
    let mut out = Vec::new();
    for &agent in &cells {
        for hard in [false, true] {
            let episode = EpisodeConfig {
                seed: 0,
                split: Split::Train,
                difficulty: if hard { Difficulty::Hard } else { Difficulty::Easy },
                object_start: if hard { spec.container_cell } else { spec.goal_cell.offset(-1, 0) },
                object_in_container: hard,
                agent_spawn: agent,
            };
            for open in [false, true] {
                let base = EnvState {
                    agent_pos: agent,
                    object_pos: agent,
                    holding: true,
                    container_open: open,
                    did_pick: true,
                    step_count: 0,
                    task: TaskId::MAIN,
                    episode: episode.clone(),
                    spawn: agent,
                };
                out.push(base.clone());
                if hard {
                    out.push(EnvState {
                        object_pos: spec.container_cell,
                        holding: false,
                        did_pick: false,
                        ..base.clone()
                    });
                }
                for &obj in &cells {
                    if obj != spec.container_cell {
                        out.push(EnvState { object_pos: obj, holding: false, ..base.clone() });
                    }
                }
            }
        }
    }
    out
}

#[test]
fn exactly_one_relevant_task_and_it_heads_the_plan() {
    let env = small();
    let mut checked = 0;
    for s in all_states(&env) {
        if env.is_done(&s) {
            assert!(matches!(relevance(&env, &s), Err(RelevanceError::Terminal)));
            continue;
        }
        let w = relevance(&env, &s).unwrap();
        assert!(w.weights.iter().all(|x| *x == 0.0 || *x == 1.0));
        assert_eq!(w.weights.iter().sum::<f64>(), 1.0, "{s:?}");
        let (task, _) = w.active().next().unwrap();
        assert_eq!(env.oracle_task_plan(&s)[0].task(), task, "{s:?}");
        checked += 1;
    }
    assert!(checked > 1000);
}

#[test]
fn relevance_ignores_agent_position() {
    let env = small();
    for s in all_states(&env).into_iter().filter(|s| !env.is_done(s) && !s.holding) {
        let w = relevance(&env, &s).unwrap();
        for &c in env.grid().free_cells() {
            let moved = EnvState { agent_pos: c, ..s.clone() };
            assert_eq!(relevance(&env, &moved).unwrap(), w);
        }
    }
}

#[test]
fn relevance_changes_only_at_stage_events() {
    let env = MiniRearrange::new(GridWorldSpec::default()).unwrap();
    let expert = ScriptedExpert::new(env.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut changes = 0;
    for seed in 0..300 {
        let ep = env.generate_episode(seed, Split::Train);
        let (mut s, _) = env.reset(TaskId::MAIN, &ep).unwrap();
        while !env.is_done(&s) {
            // Mix expert and random actions so events happen at varied times.
            let a = if rng.gen_bool(0.5) { expert.act(&s) } else { rng.gen_range(0..NUM_ACTIONS) };
            let before = relevance(&env, &s).unwrap();
            let r = env.step(&s, a).unwrap();
            if !r.done {
                let after = relevance(&env, &r.next_state).unwrap();
                let event = r.stage_info.picked || r.stage_info.opened || r.stage_info.placed;
                if after != before {
                    assert!(event, "relevance moved without an event at seed {seed}");
                    changes += 1;
                }
            }
            s = r.next_state;
        }
    }
    assert!(changes > 100);
}

#[test]
fn rejects_auxiliary_states() {
    let env = small();
    let mut s = all_states(&env).remove(0);
    s.task = TaskId::PLACE;
    assert!(matches!(relevance(&env, &s), Err(RelevanceError::NotMainTask(TaskId::PLACE))));
}
