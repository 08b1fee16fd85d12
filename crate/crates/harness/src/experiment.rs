//! Training and evaluation of one experiment across its seeds, with artifact
//! files per seed and an aggregated summary.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use auxdistill_core::checkpoint::Checkpoint;
use auxdistill_core::env::{Difficulty, MiniRearrange, Split, NUM_TASKS};
use auxdistill_core::nn::{AdamState, PolicyParams};
use auxdistill_core::trainer::{MetricsWriter, PopArtState, TrainConfig, TrainError, Trainer, UpdateMetrics};

use crate::config::{ExperimentConfig, Method, CURRICULUM_PHASE1_FRACTION};
use crate::eval::{evaluate, Actor, EvalAction, GreedyPolicy, SampledPolicy};
use crate::report::{EvalReport, SeedEval, SeedFailure};
use crate::HarnessError;

/// Mixed into the run seed for the second curriculum phase so its
/// environments do not replay phase-one streams.
const PHASE2_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// A finished training run for one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub params: PolicyParams,
    pub popart: PopArtState,
    pub adam: AdamState,
    pub metrics: Vec<UpdateMetrics>,
    /// Smallest and largest global episode seed used in training.
    pub seed_range: Option<(u64, u64)>,
    /// Update index at which the curriculum switched to the main task.
    pub phase_boundary: Option<u64>,
}

/// Called after every update with the metrics row and the live trainer.
pub type Observer<'a> = dyn FnMut(&UpdateMetrics, &Trainer) -> Result<(), HarnessError> + 'a;

fn drive(trainer: &mut Trainer, observer: &mut Observer<'_>) -> Result<Vec<UpdateMetrics>, HarnessError> {
    let mut out = Vec::new();
    while !trainer.budget_exhausted() {
        let m = trainer.update()?;
        observer(&m, trainer)?;
        out.push(m);
    }
    Ok(out)
}

fn merge_range(a: Option<(u64, u64)>, b: Option<(u64, u64)>) -> Option<(u64, u64)> {
    match (a, b) {
        (Some((l1, h1)), Some((l2, h2))) => Some((l1.min(l2), h1.max(h2))),
        (x, None) | (None, x) => x,
    }
}

/// Number of updates a budget buys; a partial update is rounded up.
pub fn updates_for(cfg: &TrainConfig) -> u64 {
    cfg.total_steps.div_ceil(cfg.steps_per_update())
}

/// Phase configs of the curriculum: auxiliary tasks only, then the main task
/// only, each with its own linear learning-rate schedule and no distillation.
pub fn curriculum_phases(base: &TrainConfig) -> (TrainConfig, TrainConfig) {
    let spu = base.steps_per_update();
    let total = updates_for(base);
    let p1 = (CURRICULUM_PHASE1_FRACTION * total as f64).round() as u64;
    let phase1 = TrainConfig {
        lambda: 0.0,
        train_main: false,
        total_steps: p1 * spu,
        lr_decay_steps: Some((p1 * spu).max(1)),
        ..base.clone()
    };
    let phase2 = TrainConfig {
        lambda: 0.0,
        train_main: true,
        aux_tasks: vec![],
        total_steps: (total - p1) * spu,
        lr_decay_steps: Some(((total - p1) * spu).max(1)),
        ..base.clone()
    };
    (phase1, phase2)
}

pub fn run_curriculum(base: &TrainConfig, seed: u64, observer: &mut Observer<'_>) -> Result<SeedRun, HarnessError> {
    let (c1, c2) = curriculum_phases(base);
    let mut t1 = Trainer::new(c1, seed)?;
    let mut metrics = drive(&mut t1, observer)?;
    let boundary = metrics.len() as u64;
    let steps1 = t1.steps_done();
    let range1 = t1.seed_range();
    let (params, popart, _) = t1.into_parts();
    let mut t2 = Trainer::with_state(c2, seed ^ PHASE2_SALT, params, popart)?.with_offsets(steps1, boundary);
    metrics.extend(drive(&mut t2, observer)?);
    let seed_range = merge_range(range1, t2.seed_range());
    let (params, popart, adam) = t2.into_parts();
    Ok(SeedRun { seed, params, popart, adam, metrics, seed_range, phase_boundary: Some(boundary) })
}

/// Trains one seed of `cfg`'s method.
pub fn train_seed(cfg: &ExperimentConfig, seed: u64, observer: &mut Observer<'_>) -> Result<SeedRun, HarnessError> {
    let train = cfg.resolved_train();
    if cfg.method == Method::Curriculum {
        return run_curriculum(&train, seed, observer);
    }
    let mut t = Trainer::new(train, seed)?;
    let metrics = drive(&mut t, observer)?;
    let seed_range = t.seed_range();
    let (params, popart, adam) = t.into_parts();
    Ok(SeedRun { seed, params, popart, adam, metrics, seed_range, phase_boundary: None })
}

/// Main-task success on both splits and difficulties. Sampled evaluation
/// draws actions from a stream derived from `seed` and the cell.
pub fn evaluate_params(
    train: &TrainConfig,
    params: &PolicyParams,
    seed: u64,
    n: usize,
    action: EvalAction,
) -> Result<SeedEval, HarnessError> {
    let env = MiniRearrange::new(train.grid.clone()).map_err(TrainError::from)?;
    let cell = |k: u64, split, d| {
        let mut actor: Box<dyn Actor> = match action {
            EvalAction::Greedy => Box::new(GreedyPolicy::new(params)),
            EvalAction::Sample => Box::new(SampledPolicy::new(params, seed.wrapping_mul(4).wrapping_add(k))),
        };
        evaluate(&env, actor.as_mut(), split, d, n)
    };
    Ok(SeedEval {
        seed,
        train_easy: cell(0, Split::Train, Difficulty::Easy),
        train_hard: cell(1, Split::Train, Difficulty::Hard),
        eval_easy: cell(2, Split::Eval, Difficulty::Easy),
        eval_hard: cell(3, Split::Eval, Difficulty::Hard),
    })
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub run: SeedRun,
    pub eval: SeedEval,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub report: EvalReport,
    pub outcomes: Vec<SeedOutcome>,
    pub output_dir: PathBuf,
}

impl ExperimentSummary {
    pub fn all_failed_non_finite(&self) -> bool {
        self.outcomes.is_empty() && self.report.failures.iter().all(|f| f.non_finite)
    }
}

fn checkpoint(
    dir: &Path,
    name: &str,
    t_params: &PolicyParams,
    adam: &AdamState,
    popart: &PopArtState,
) -> Result<(), HarnessError> {
    let c = Checkpoint { params: t_params.clone(), adam: adam.clone(), popart: popart.clone() };
    c.save(&dir.join(name))?;
    Ok(())
}

fn run_one_seed(
    cfg: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    log: &mut dyn FnMut(&str),
) -> Result<SeedOutcome, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut writer = MetricsWriter::new(BufWriter::new(File::create(dir.join("metrics.csv"))?), true)?;
    let every = cfg.checkpoint_every;
    let total = updates_for(&cfg.resolved_train());
    let mut observer = |m: &UpdateMetrics, t: &Trainer| -> Result<(), HarnessError> {
        writer.append(m)?;
        if every.is_some_and(|k| m.update.is_multiple_of(k)) {
            checkpoint(dir, &format!("update_{:06}.ckpt", m.update), t.params(), t.adam(), t.popart())?;
        }
        if m.update.is_multiple_of(50) || m.update == total {
            log(&format!(
                "seed {seed} update {}/{total} steps {} main success {:.2} (easy {:.2}, hard {:.2})",
                m.update, m.env_steps, m.success[0], m.success_main_easy, m.success_main_hard
            ));
        }
        Ok(())
    };
    let run = train_seed(cfg, seed, &mut observer)?;
    checkpoint(dir, "final.ckpt", &run.params, &run.adam, &run.popart)?;
    let eval = evaluate_params(&cfg.resolved_train(), &run.params, seed, cfg.eval_episodes, cfg.eval_action)?;
    serde_json::to_writer_pretty(File::create(dir.join("eval.json"))?, &eval).map_err(std::io::Error::other)?;
    Ok(SeedOutcome { run, eval })
}

/// Provenance lines written at the top of the summary CSV.
pub fn provenance(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let t = cfg.resolved_train();
    let aux: Vec<String> = t.aux_tasks.iter().map(|a| a.to_string()).collect();
    vec![
        ("method".into(), cfg.method.name().into()),
        ("lambda".into(), t.lambda.to_string()),
        ("aux_tasks".into(), if aux.is_empty() { "none".into() } else { aux.join(" ") }),
        ("total_steps".into(), t.total_steps.to_string()),
        ("steps_per_update".into(), t.steps_per_update().to_string()),
        ("seeds".into(), cfg.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")),
        ("eval_episodes".into(), cfg.eval_episodes.to_string()),
        ("eval_action".into(), cfg.eval_action.name().into()),
    ]
}

/// Trains and evaluates every seed. A failing seed is recorded and the
/// remaining seeds still run; configuration errors abort before training.
pub fn run_experiment(cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<ExperimentSummary, HarnessError> {
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)?;
    serde_json::to_writer_pretty(File::create(out.join("config.json"))?, cfg).map_err(std::io::Error::other)?;

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for &seed in &cfg.seeds {
        let dir = out.join(format!("seed_{seed}"));
        match run_one_seed(cfg, seed, &dir, log) {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                let non_finite = matches!(e, HarnessError::Train(TrainError::NonFinite(_)));
                if let HarnessError::Train(TrainError::NonFinite(dump)) = &e {
                    let f = File::create(dir.join("nan_dump.json"))?;
                    serde_json::to_writer_pretty(f, dump).map_err(std::io::Error::other)?;
                }
                log(&format!("seed {seed} failed: {e}"));
                failures.push(SeedFailure { seed, error: e.to_string(), non_finite });
            }
        }
    }
    let report = EvalReport {
        method: cfg.method.name().into(),
        lambda: cfg.resolved_train().lambda,
        seeds: outcomes.iter().map(|o| o.eval.clone()).collect(),
        failures,
    };
    report.write_summary_csv(BufWriter::new(File::create(out.join("summary.csv"))?), &provenance(cfg))?;
    report.write_per_seed_csv(BufWriter::new(File::create(out.join("per_seed.csv"))?))?;
    serde_json::to_writer_pretty(File::create(out.join("summary.json"))?, &report).map_err(std::io::Error::other)?;
    Ok(ExperimentSummary { report, outcomes, output_dir: out })
}

/// One experiment per λ, each in `output_dir/lambda_<λ>`.
pub fn sweep_lambda(
    cfg: &ExperimentConfig,
    lambdas: &[f64],
    log: &mut dyn FnMut(&str),
) -> Result<Vec<(f64, ExperimentSummary)>, HarnessError> {
    if lambdas.is_empty() {
        return Err(HarnessError::Config("lambda list is empty".into()));
    }
    let mut rows = Vec::new();
    for &l in lambdas {
        let mut c = cfg.clone();
        c.train.lambda = l;
        c.output_dir = cfg.output_dir.join(format!("lambda_{l}"));
        log(&format!("lambda {l}"));
        rows.push((l, run_experiment(&c, log)?));
    }
    write_table(
        &cfg.output_dir.join("lambda_sweep.csv"),
        "lambda",
        rows.iter().map(|(l, s)| (l.to_string(), &s.report)),
    )?;
    Ok(rows)
}

/// The four auxiliary-subset variants, each in `output_dir/<subset>`.
pub fn ablate_aux(
    cfg: &ExperimentConfig,
    log: &mut dyn FnMut(&str),
) -> Result<Vec<(String, ExperimentSummary)>, HarnessError> {
    let mut rows = Vec::new();
    for (name, subset) in crate::config::ablation_subsets() {
        let mut c = cfg.clone();
        c.aux_tasks = Some(subset);
        c.output_dir = cfg.output_dir.join(name);
        log(&format!("aux subset {name}"));
        rows.push((name.to_string(), run_experiment(&c, log)?));
    }
    write_table(
        &cfg.output_dir.join("aux_ablation.csv"),
        "aux_subset",
        rows.iter().map(|(n, s)| (n.clone(), &s.report)),
    )?;
    Ok(rows)
}

/// One row per variant: seed-mean/std success for every split and column.
fn write_table<'a>(
    path: &Path,
    key: &str,
    rows: impl Iterator<Item = (String, &'a EvalReport)>,
) -> Result<(), HarnessError> {
    use crate::report::Column;
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::other)?;
    let mut header = vec![key.to_string()];
    for split in [Split::Train, Split::Eval] {
        for col in Column::ALL {
            header.push(format!("{}_{}_mean", split.name(), col.name()));
            header.push(format!("{}_{}_std", split.name(), col.name()));
        }
    }
    header.push("n_seeds".into());
    w.write_record(&header).map_err(std::io::Error::other)?;
    for (k, r) in rows {
        let mut rec = vec![k];
        for split in [Split::Train, Split::Eval] {
            for col in Column::ALL {
                let a = r.aggregate(split, col);
                rec.push(a.mean.to_string());
                rec.push(a.std.to_string());
            }
        }
        rec.push(r.seeds.len().to_string());
        w.write_record(&rec).map_err(std::io::Error::other)?;
    }
    w.flush()?;
    Ok(())
}

/// Total env steps a run consumed, from its last metrics row.
pub fn consumed_steps(run: &SeedRun) -> u64 {
    run.metrics.last().map_or(0, |m| m.env_steps)
}

/// Env steps spent per task over the whole run (both curriculum phases).
pub fn steps_per_task(run: &SeedRun) -> [u64; NUM_TASKS] {
    let n = run.metrics.len();
    let mut phase_ends = Vec::new();
    if let Some(b) = run.phase_boundary.map(|b| b as usize).filter(|b| *b > 0 && *b < n) {
        phase_ends.push(b - 1);
    }
    if n > 0 {
        phase_ends.push(n - 1);
    }
    let mut total = [0; NUM_TASKS];
    for i in phase_ends {
        for (t, s) in total.iter_mut().zip(run.metrics[i].steps_per_task) {
            *t += s;
        }
    }
    total
}
