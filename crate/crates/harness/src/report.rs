//! Per-seed evaluation results and their aggregation across seeds.

use std::io::Write;

use auxdistill_core::env::{Difficulty, Split};
use serde::{Deserialize, Serialize};

use crate::eval::EvalCell;
use crate::HarnessError;

/// Difficulty column of a report; `All` pools easy and hard episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Column {
    Easy,
    Hard,
    All,
}

impl Column {
    pub const ALL: [Column; 3] = [Column::Easy, Column::Hard, Column::All];

    pub fn name(self) -> &'static str {
        match self {
            Column::Easy => "easy",
            Column::Hard => "hard",
            Column::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEval {
    pub seed: u64,
    pub train_easy: EvalCell,
    pub train_hard: EvalCell,
    pub eval_easy: EvalCell,
    pub eval_hard: EvalCell,
}

impl SeedEval {
    pub fn difficulty_cell(&self, split: Split, d: Difficulty) -> EvalCell {
        match (split, d) {
            (Split::Train, Difficulty::Easy) => self.train_easy,
            (Split::Train, Difficulty::Hard) => self.train_hard,
            (Split::Eval, Difficulty::Easy) => self.eval_easy,
            (Split::Eval, Difficulty::Hard) => self.eval_hard,
        }
    }

    pub fn cell(&self, split: Split, col: Column) -> EvalCell {
        match col {
            Column::Easy => self.difficulty_cell(split, Difficulty::Easy),
            Column::Hard => self.difficulty_cell(split, Difficulty::Hard),
            Column::All => {
                self.difficulty_cell(split, Difficulty::Easy).merge(self.difficulty_cell(split, Difficulty::Hard))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Population standard deviation across seeds.
    pub std: f64,
    pub n_seeds: usize,
    pub episodes: usize,
}

/// Mean and population standard deviation; NaN mean for no values.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
    pub non_finite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub lambda: f64,
    pub seeds: Vec<SeedEval>,
    pub failures: Vec<SeedFailure>,
}

impl EvalReport {
    pub fn aggregate(&self, split: Split, col: Column) -> Aggregate {
        let cells: Vec<EvalCell> = self.seeds.iter().map(|s| s.cell(split, col)).collect();
        let rates: Vec<f64> = cells.iter().map(EvalCell::rate).collect();
        let (mean, std) = mean_std(&rates);
        Aggregate { mean, std, n_seeds: cells.len(), episodes: cells.iter().map(|c| c.episodes).sum() }
    }

    /// Seed-mean success on `split` for `col`.
    pub fn mean(&self, split: Split, col: Column) -> f64 {
        self.aggregate(split, col).mean
    }

    /// Aggregated rows with a `#`-comment provenance header.
    pub fn write_summary_csv(&self, mut w: impl Write, provenance: &[(String, String)]) -> Result<(), HarnessError> {
        for (k, v) in provenance {
            writeln!(w, "# {k}: {v}")?;
        }
        let failed: Vec<String> = self.failures.iter().map(|f| f.seed.to_string()).collect();
        writeln!(w, "# failed_seeds: {}", if failed.is_empty() { "none".into() } else { failed.join(" ") })?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["method", "lambda", "split", "difficulty", "mean", "std", "n_seeds", "episodes"])
            .map_err(csv_err)?;
        for split in [Split::Train, Split::Eval] {
            for col in Column::ALL {
                let a = self.aggregate(split, col);
                csv.write_record([
                    self.method.clone(),
                    self.lambda.to_string(),
                    split.name().to_string(),
                    col.name().to_string(),
                    a.mean.to_string(),
                    a.std.to_string(),
                    a.n_seeds.to_string(),
                    a.episodes.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        csv.flush()?;
        Ok(())
    }

    pub fn write_per_seed_csv(&self, w: impl Write) -> Result<(), HarnessError> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["method", "seed", "split", "difficulty", "successes", "episodes", "success_rate"])
            .map_err(csv_err)?;
        for s in &self.seeds {
            for split in [Split::Train, Split::Eval] {
                for col in Column::ALL {
                    let c = s.cell(split, col);
                    csv.write_record([
                        self.method.clone(),
                        s.seed.to_string(),
                        split.name().to_string(),
                        col.name().to_string(),
                        c.successes.to_string(),
                        c.episodes.to_string(),
                        c.rate().to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        csv.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Io(std::io::Error::other(e))
}
