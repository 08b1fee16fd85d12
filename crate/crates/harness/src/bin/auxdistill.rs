use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use auxdistill_core::checkpoint::Checkpoint;
use auxdistill_core::env::{Difficulty, MiniRearrange, ScriptedExpert, Split, TaskId};
use auxdistill_core::trainer::TrainError;
use auxdistill_harness::config::{ExperimentConfig, Method};
use auxdistill_harness::eval::{evaluate_task, EvalAction, ExpertActor};
use auxdistill_harness::experiment::{ablate_aux, evaluate_params, ExperimentSummary};
use auxdistill_harness::report::{Column, EvalReport};
use auxdistill_harness::{plot, run_experiment, sweep_lambda, HarnessError};
use clap::{Args, Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_NON_FINITE: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

#[derive(Parser)]
#[command(name = "auxdistill", version, about = "Train and evaluate multi-task PPO with auxiliary-task distillation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment config (JSON). Defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Method, overriding the config.
    #[arg(long)]
    method: Option<Method>,
    /// Comma-separated seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Environment-step budget per seed, overriding the config.
    #[arg(long)]
    budget: Option<u64>,
    /// Evaluation episodes per split and difficulty.
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Evaluation action selection: greedy or sample.
    #[arg(long)]
    eval_action: Option<EvalAction>,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every seed of one experiment.
    Train(RunArgs),
    /// Greedy main-task evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Config providing the grid layout (defaults otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        /// Action selection: greedy or sample.
        #[arg(long, default_value = "greedy")]
        eval_action: EvalAction,
    },
    /// One experiment per distillation coefficient.
    SweepLambda {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.5,1.0")]
        lambdas: Vec<f64>,
    },
    /// Train with each of the four auxiliary-task subsets.
    AblateAux(RunArgs),
    /// Learning-curve SVGs and a tidy CSV from metrics files.
    Plot {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
    },
    /// Check that the scripted expert solves every task and difficulty.
    ExpertValidate {
        #[arg(long, default_value_t = 200)]
        episodes: usize,
    },
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    if let Some(b) = args.budget {
        cfg.train.total_steps = b;
    }
    if let Some(n) = args.eval_episodes {
        cfg.eval_episodes = n;
    }
    if let Some(a) = args.eval_action {
        cfg.eval_action = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(label: &str, r: &EvalReport) {
    let lambda = if r.lambda.is_nan() { "n/a".to_string() } else { r.lambda.to_string() };
    println!("{label}  (method {}, lambda {lambda}, {} seed(s))", r.method, r.seeds.len());
    for split in [Split::Train, Split::Eval] {
        let cells: Vec<String> = Column::ALL
            .iter()
            .map(|c| {
                let a = r.aggregate(split, *c);
                format!("{} {:.3} ± {:.3}", c.name(), a.mean, a.std)
            })
            .collect();
        println!("  {:<5}  {}", split.name(), cells.join("   "));
    }
    for f in &r.failures {
        println!("  seed {} FAILED: {}", f.seed, f.error);
    }
}

fn summary_code(summaries: &[&ExperimentSummary]) -> ExitCode {
    if summaries.iter().all(|s| s.report.failures.is_empty()) {
        ExitCode::SUCCESS
    } else if summaries.iter().all(|s| s.all_failed_non_finite()) {
        ExitCode::from(EXIT_NON_FINITE)
    } else {
        ExitCode::from(EXIT_PARTIAL)
    }
}

fn log(line: &str) {
    eprintln!("{line}");
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Train(args) => {
            let cfg = load_config(&args)?;
            let s = run_experiment(&cfg, &mut log)?;
            print_report(&cfg.output_dir.display().to_string(), &s.report);
            Ok(summary_code(&[&s]))
        }
        Command::Eval { checkpoint, config, episodes, eval_action } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            let ckpt = Checkpoint::load(&checkpoint).map_err(HarnessError::from)?;
            let e = evaluate_params(&cfg.resolved_train(), &ckpt.params, 0, episodes.max(1), eval_action)?;
            let r = EvalReport { method: "checkpoint".into(), lambda: f64::NAN, seeds: vec![e], failures: vec![] };
            print_report(&checkpoint.display().to_string(), &r);
            Ok(ExitCode::SUCCESS)
        }
        Command::SweepLambda { run, lambdas } => {
            let cfg = load_config(&run)?;
            let rows = sweep_lambda(&cfg, &lambdas, &mut log)?;
            for (l, s) in &rows {
                print_report(&format!("lambda {l}"), &s.report);
            }
            Ok(summary_code(&rows.iter().map(|r| &r.1).collect::<Vec<_>>()))
        }
        Command::AblateAux(args) => {
            let cfg = load_config(&args)?;
            let rows = ablate_aux(&cfg, &mut log)?;
            for (name, s) in &rows {
                print_report(name, &s.report);
            }
            Ok(summary_code(&rows.iter().map(|r| &r.1).collect::<Vec<_>>()))
        }
        Command::Plot { out, metrics } => {
            for p in plot::export_curves(&metrics, &out)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ExpertValidate { episodes } => {
            let env = MiniRearrange::new(Default::default()).context("default grid")?;
            let mut expert = ExpertActor(ScriptedExpert::new(env.clone()));
            let mut ok = true;
            for task in TaskId::ALL {
                for split in [Split::Train, Split::Eval] {
                    for d in [Difficulty::Easy, Difficulty::Hard] {
                        let c = evaluate_task(&env, &mut expert, task, split, d, episodes.max(1));
                        if c.episodes == 0 {
                            continue;
                        }
                        ok &= c.successes == c.episodes;
                        println!("{task:<20} {:<5} {:<4} {}/{}", split.name(), d.name(), c.successes, c.episodes);
                    }
                }
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    match err.downcast_ref::<HarnessError>() {
        Some(HarnessError::Config(_)) | Some(HarnessError::Train(TrainError::Config(_))) => ExitCode::from(EXIT_CONFIG),
        Some(HarnessError::Train(TrainError::NonFinite(_))) => ExitCode::from(EXIT_NON_FINITE),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}
