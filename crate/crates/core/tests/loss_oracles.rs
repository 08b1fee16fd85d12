mod common;

use auxdistill_core::env::{TaskId, FEATURE_DIM, NUM_ACTIONS, NUM_TASKS, OBS_DIM};
use auxdistill_core::nn::{NetDims, PolicyParams, Tensor2};
use auxdistill_core::relevance::RelevanceVector;
use auxdistill_core::trainer::{minibatch_loss, DistillAveraging, Minibatch, RlAveraging, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIMS: NetDims = NetDims { obs_dim: OBS_DIM, hidden: 12, n_actions: NUM_ACTIONS, n_values: NUM_TASKS };

fn obs_row(task: TaskId, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut r: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
    r.extend(task.indicator());
    r
}

fn random_batch(rng: &mut ChaCha8Rng, rows: usize) -> Minibatch {
    let tasks: Vec<TaskId> = (0..rows).map(|i| TaskId::ALL[i % NUM_TASKS]).collect();
    let obs: Vec<Vec<f64>> = tasks.iter().map(|t| obs_row(*t, rng)).collect();
    let relevance = tasks
        .iter()
        .map(|t| {
            t.is_main().then(|| {
                let mut w = RelevanceVector::default();
                for x in w.weights.iter_mut() {
                    *x = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
                }
                w
            })
        })
        .collect();
    Minibatch {
        obs: Tensor2::from_rows(&obs),
        actions: (0..rows).map(|_| rng.gen_range(0..NUM_ACTIONS)).collect(),
        old_log_probs: (0..rows).map(|_| rng.gen_range(-3.0..-1.0)).collect(),
        advantages: (0..rows).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        value_targets: (0..rows).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        relevance,
        tasks,
    }
}

struct Oracle {
    per_task_rl: [f64; NUM_TASKS],
    distill_sum: f64,
    main_rows: usize,
}

/// Scalar loop over rows; no shared code with the library beyond the params.
fn oracle(params: &PolicyParams, mb: &Minibatch, cfg: &TrainConfig) -> Oracle {
    let n = mb.tasks.len();
    let mean = mb.advantages.iter().sum::<f64>() / n as f64;
    let var = mb.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let adv: Vec<f64> = mb.advantages.iter().map(|a| (a - mean) / (var.sqrt() + 1e-8)).collect();

    let mut pol = [0.0; NUM_TASKS];
    let mut val = [0.0; NUM_TASKS];
    let mut ent = [0.0; NUM_TASKS];
    let mut cnt = [0usize; NUM_TASKS];
    let mut distill_sum = 0.0;
    let mut main_rows = 0;
    for r in 0..n {
        let t = mb.tasks[r].index();
        let x = mb.obs.row(r);
        let (logits, values) = common::reference_forward(params, x);
        let p = common::probs(&logits);
        let ratio = (p[mb.actions[r]].ln() - mb.old_log_probs[r]).exp();
        let clipped = ratio.max(1.0 - cfg.clip_eps).min(1.0 + cfg.clip_eps);
        let obj = if ratio * adv[r] < clipped * adv[r] { ratio * adv[r] } else { clipped * adv[r] };
        pol[t] -= obj;
        val[t] += (values[t] - mb.value_targets[r]).powi(2);
        ent[t] -= p.iter().map(|q| q * q.ln()).sum::<f64>();
        cnt[t] += 1;
        if t == 0 {
            main_rows += 1;
            let w = mb.relevance[r].unwrap();
            for a in TaskId::AUXILIARY {
                let wi = w.weights[a.index() - 1];
                if wi == 0.0 {
                    continue;
                }
                let mut swapped = x.to_vec();
                swapped[FEATURE_DIM..].copy_from_slice(&a.indicator());
                let (aux_logits, _) = common::reference_forward(params, &swapped);
                distill_sum += wi * common::kl(&logits, &aux_logits);
            }
        }
    }
    let mut per_task_rl = [0.0; NUM_TASKS];
    for t in 0..NUM_TASKS {
        if cnt[t] > 0 {
            let c = cnt[t] as f64;
            per_task_rl[t] = pol[t] / c + cfg.value_coef * val[t] / c - cfg.entropy_coef * ent[t] / c;
        }
    }
    Oracle { per_task_rl, distill_sum, main_rows }
}

#[test]
fn minibatch_loss_matches_scalar_oracle() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = PolicyParams::init(DIMS, &mut rng);
        let params =
            PolicyParams::from_flat(DIMS, params.as_slice().iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect())
                .unwrap();
        let mb = random_batch(&mut rng, 23);
        for (rl_averaging, distill_averaging) in
            [(RlAveraging::PerAuxTask, DistillAveraging::Sum), (RlAveraging::Mean, DistillAveraging::PerAuxTask)]
        {
            let cfg =
                TrainConfig { lambda: 0.3, hidden: DIMS.hidden, rl_averaging, distill_averaging, ..Default::default() };
            let (rep, _) = minibatch_loss(&params, &mb, &cfg, false).unwrap();
            let o = oracle(&params, &mb, &cfg);
            for t in 0..NUM_TASKS {
                assert!((rep.per_task[t].rl - o.per_task_rl[t]).abs() < 1e-10, "seed {seed} task {t}");
            }
            let div = match rl_averaging {
                RlAveraging::PerAuxTask => 4.0,
                RlAveraging::Mean => 5.0,
            };
            let ddiv = match distill_averaging {
                DistillAveraging::Sum => 1.0,
                DistillAveraging::PerAuxTask => 4.0,
            };
            let distill = o.distill_sum / o.main_rows as f64 / ddiv;
            assert!((rep.distill - distill).abs() < 1e-10, "seed {seed}: {} vs {distill}", rep.distill);
            let total = o.per_task_rl.iter().sum::<f64>() / div + 0.3 * distill;
            assert!((rep.total - total).abs() < 1e-10);
            assert!(rep.decomposition_error() < 1e-9);
            assert!(rep.distill >= 0.0);
        }
    }
}

/// A network that ignores the task indicator and predicts the same value in
/// every slot, so every task sees the same RL loss on identical rows.
fn task_blind(rng: &mut ChaCha8Rng) -> PolicyParams {
    let mut p = PolicyParams::init(DIMS, rng);
    let h = DIMS.hidden;
    let data = p.as_mut_slice();
    for k in FEATURE_DIM..OBS_DIM {
        data[k * h..(k + 1) * h].iter_mut().for_each(|v| *v = 0.0);
    }
    let value_off = (OBS_DIM * h + h) + (h * h + h) + (h * NUM_ACTIONS + NUM_ACTIONS);
    for i in 0..=h {
        // rows 0..h are weights, row h holds the biases
        let base = value_off + i * NUM_TASKS;
        let first = data[base];
        data[base..base + NUM_TASKS].iter_mut().for_each(|v| *v = first);
    }
    p
}

#[test]
fn equal_rl_terms_scale_by_five_quarters() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = task_blind(&mut rng);
    let feats: Vec<Vec<f64>> = (0..3).map(|_| (0..FEATURE_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let (actions, olp, tgt): (Vec<usize>, Vec<f64>, Vec<f64>) =
        ((0..3).map(|i| i * 2).collect(), vec![-1.9, -2.1, -1.5], vec![0.3, -0.7, 1.1]);
    let mut mb = Minibatch {
        obs: Tensor2::zeros(0, OBS_DIM),
        tasks: vec![],
        actions: vec![],
        old_log_probs: vec![],
        advantages: vec![],
        value_targets: vec![],
        relevance: vec![],
    };
    let mut rows = Vec::new();
    for t in TaskId::ALL {
        for i in 0..3 {
            let mut r = feats[i].clone();
            r.extend(t.indicator());
            rows.push(r);
            mb.tasks.push(t);
            mb.actions.push(actions[i]);
            mb.old_log_probs.push(olp[i]);
            mb.advantages.push([1.0, -0.5, 2.0][i]);
            mb.value_targets.push(tgt[i]);
            mb.relevance.push(t.is_main().then(|| RelevanceVector::one_hot(TaskId::PICK)));
        }
    }
    mb.obs = Tensor2::from_rows(&rows);
    let cfg = TrainConfig { hidden: DIMS.hidden, ..Default::default() };
    let (rep, _) = minibatch_loss(&params, &mb, &cfg, false).unwrap();
    assert!(rep.distill.abs() < 1e-15);
    let l = rep.per_task[0].rl;
    for t in &rep.per_task {
        assert!((t.rl - l).abs() < 1e-12);
    }
    assert!((rep.total - l * 5.0 / 4.0).abs() < 1e-12);
}

#[test]
fn hand_built_three_row_distill() {
    // Inflated weights so swapping the indicator moves the distribution.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = PolicyParams::init(DIMS, &mut rng);
    let params = PolicyParams::from_flat(DIMS, params.as_slice().iter().map(|v| v * 3.0).collect()).unwrap();
    let weights = [
        RelevanceVector::one_hot(TaskId::PICK),
        RelevanceVector { weights: [0.0, 1.0, 1.0, 0.0] },
        RelevanceVector::default(),
    ];
    let rows: Vec<Vec<f64>> = (0..3).map(|_| obs_row(TaskId::MAIN, &mut rng)).collect();
    let mb = Minibatch {
        obs: Tensor2::from_rows(&rows),
        tasks: vec![TaskId::MAIN; 3],
        actions: vec![0, 1, 2],
        old_log_probs: vec![-2.0; 3],
        advantages: vec![0.5, -0.5, 1.0],
        value_targets: vec![0.0; 3],
        relevance: weights.iter().map(|w| Some(*w)).collect(),
    };
    let mut by_hand = 0.0;
    for (r, w) in rows.iter().zip(&weights) {
        let (main, _) = common::reference_forward(&params, r);
        for a in TaskId::AUXILIARY {
            let wi = w.weight(a);
            if wi > 0.0 {
                let mut s = r.clone();
                s[FEATURE_DIM..].copy_from_slice(&a.indicator());
                by_hand += wi * common::kl(&main, &common::reference_forward(&params, &s).0);
            }
        }
    }
    by_hand /= 3.0;
    let cfg = TrainConfig { hidden: DIMS.hidden, ..Default::default() };
    let (rep, _) = minibatch_loss(&params, &mb, &cfg, false).unwrap();
    assert!(by_hand > 0.0);
    assert!((rep.distill - by_hand).abs() < 1e-10);
}
