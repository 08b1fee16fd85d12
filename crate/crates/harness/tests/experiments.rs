use std::fs;

use auxdistill_core::env::{Split, TaskId, FEATURE_DIM};
use auxdistill_core::nn::PolicyParams;
use auxdistill_core::trainer::{derive_rng, net_dims, TrainConfig};
use auxdistill_harness::config::{ExperimentConfig, Method};
use auxdistill_harness::experiment::{consumed_steps, curriculum_phases, run_curriculum, steps_per_task, train_seed};
use auxdistill_harness::report::Column;
use auxdistill_harness::run_experiment;

fn tiny_train() -> TrainConfig {
    TrainConfig {
        envs_per_task: 2,
        rollout_len: 32,
        minibatches: 2,
        hidden: 16,
        total_steps: 3200,
        ..Default::default()
    }
}

fn tiny(method: Method, dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        method,
        train: tiny_train(),
        seeds: vec![0, 1],
        eval_episodes: 5,
        output_dir: dir.to_path_buf(),
        checkpoint_every: Some(5),
        ..Default::default()
    }
}

#[test]
fn writes_artifacts_and_reproduces_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(Method::AuxDistill, &dir.path().join("a"));
    let s = run_experiment(&cfg, &mut |_| {}).unwrap();
    assert_eq!(s.report.seeds.len(), 2);
    assert_eq!(s.report.aggregate(Split::Eval, Column::Hard).n_seeds, 2);
    for seed in [0, 1] {
        let d = cfg.output_dir.join(format!("seed_{seed}"));
        for f in ["metrics.csv", "final.ckpt", "update_000005.ckpt", "update_000010.ckpt", "eval.json"] {
            assert!(d.join(f).exists(), "{f}");
        }
    }
    for f in ["summary.csv", "per_seed.csv", "summary.json", "config.json"] {
        assert!(cfg.output_dir.join(f).exists());
    }
    let again =
        run_experiment(&ExperimentConfig { output_dir: dir.path().join("b"), ..cfg.clone() }, &mut |_| {}).unwrap();
    assert_eq!(
        fs::read_to_string(cfg.output_dir.join("summary.json")).unwrap(),
        fs::read_to_string(dir.path().join("b/summary.json")).unwrap()
    );
    for (x, y) in s.outcomes.iter().zip(&again.outcomes) {
        assert_eq!(x.run.params, y.run.params);
        assert!(x.run.metrics.iter().zip(&y.run.metrics).all(|(m, n)| m.same_run_values(n)));
    }
}

#[test]
fn no_distill_provenance_shows_zero_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Method::NoDistill, dir.path());
    cfg.seeds = vec![3];
    cfg.train.lambda = 0.7;
    run_experiment(&cfg, &mut |_| {}).unwrap();
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(text.contains("# method: no_distill\n# lambda: 0\n"));
}

#[test]
fn every_method_spends_the_same_budget_on_train_seeds_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut spent = Vec::new();
    for m in [Method::AuxDistill, Method::Monolithic, Method::NoDistill, Method::Curriculum] {
        let cfg = tiny(m, dir.path());
        let run = train_seed(&cfg, 0, &mut |_, _| Ok(())).unwrap();
        let (lo, hi) = run.seed_range.unwrap();
        assert!(Split::Train.contains(lo) && Split::Train.contains(hi), "{m:?}");
        assert_eq!(steps_per_task(&run).iter().sum::<u64>(), consumed_steps(&run));
        spent.push(consumed_steps(&run));
        if m == Method::Monolithic {
            assert_eq!(steps_per_task(&run)[1..], [0; 4]);
        }
    }
    assert!(spent.iter().all(|s| *s == spent[0]), "{spent:?}");
    assert!(spent[0] >= 3200);
}

#[test]
fn curriculum_phases_split_the_budget() {
    let base = TrainConfig { total_steps: 2_000_000, ..Default::default() };
    let (p1, p2) = curriculum_phases(&base);
    let spu = base.steps_per_update();
    let total_updates = base.total_steps.div_ceil(spu);
    let boundary = p1.total_steps / spu;
    assert!((boundary as f64 - 0.4 * total_updates as f64).abs() <= 1.0);
    assert_eq!(p1.total_steps + p2.total_steps, total_updates * spu);
    assert!(!p1.train_main && p1.lambda == 0.0);
    assert!(p2.train_main && p2.aux_tasks.is_empty() && p2.lambda == 0.0);
    assert_eq!(p2.lr_at(0), base.lr);
}

#[test]
fn curriculum_phase_one_never_touches_the_main_task() {
    let base = TrainConfig { total_steps: 10 * 320, ..tiny_train() };
    let init = PolicyParams::init(net_dims(&base), &mut derive_rng(7, 1));
    let mut phase1_params = None;
    let (p1, _) = curriculum_phases(&base);
    let boundary = p1.total_steps / p1.steps_per_update();
    let run = run_curriculum(&base, 7, &mut |m, t| {
        if m.update == boundary {
            phase1_params = Some(t.params().clone());
        }
        Ok(())
    })
    .unwrap();
    assert_eq!(run.phase_boundary, Some(boundary));
    assert_eq!(boundary, 4);
    for m in &run.metrics[..boundary as usize] {
        assert_eq!(m.steps_per_task[0], 0);
        assert!(m.success[0].is_nan());
    }
    assert!(run.metrics[boundary as usize..].iter().all(|m| m.steps_per_task[1..] == [0; 4]));

    // First-layer weights reading the main-task indicator are unchanged.
    let p = phase1_params.unwrap();
    let h = base.hidden;
    let row = FEATURE_DIM + TaskId::MAIN.index();
    assert_eq!(p.as_slice()[row * h..(row + 1) * h], init.as_slice()[row * h..(row + 1) * h]);
    let aux_row = FEATURE_DIM + TaskId::PICK.index();
    assert_ne!(p.as_slice()[aux_row * h..(aux_row + 1) * h], init.as_slice()[aux_row * h..(aux_row + 1) * h]);
}

#[test]
fn failing_seed_is_recorded_and_others_continue() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Method::AuxDistill, dir.path());
    cfg.seeds = vec![0, 1, 2];
    // A plain file where seed 1's directory should go.
    fs::write(dir.path().join("seed_1"), "").unwrap();
    let s = run_experiment(&cfg, &mut |_| {}).unwrap();
    assert_eq!(s.report.seeds.iter().map(|e| e.seed).collect::<Vec<_>>(), vec![0, 2]);
    assert_eq!(s.report.failures.len(), 1);
    assert_eq!(s.report.failures[0].seed, 1);
    assert!(!s.report.failures[0].non_finite);
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(text.contains("# failed_seeds: 1\n"));
}
