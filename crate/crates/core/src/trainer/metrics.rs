//! Per-update training metrics and their CSV form.

use std::collections::VecDeque;
use std::io::Write;

use crate::env::{Difficulty, TaskId, NUM_TASKS};

use super::rollout::EpisodeRecord;
use super::TrainError;

/// Episodes kept in each rolling success/return window.
pub const WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateMetrics {
    pub update: u64,
    pub env_steps: u64,
    pub steps_per_task: [u64; NUM_TASKS],
    /// Rolling success rate per task; NaN until a task has finished an episode.
    pub success: [f64; NUM_TASKS],
    pub success_main_easy: f64,
    pub success_main_hard: f64,
    pub mean_return: [f64; NUM_TASKS],
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub distill_loss: f64,
    pub total_loss: f64,
    pub lr: f64,
    pub wall_time: f64,
}

impl UpdateMetrics {
    pub fn header() -> Vec<String> {
        let mut h = vec!["update".to_string(), "env_steps".to_string()];
        h.extend(TaskId::ALL.iter().map(|t| format!("steps_{t}")));
        h.extend(TaskId::ALL.iter().map(|t| format!("success_{t}")));
        h.push("success_main_easy".into());
        h.push("success_main_hard".into());
        h.extend(TaskId::ALL.iter().map(|t| format!("return_{t}")));
        for c in ["policy_loss", "value_loss", "entropy", "distill_loss", "total_loss", "lr", "wall_time"] {
            h.push(c.into());
        }
        h
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![self.update.to_string(), self.env_steps.to_string()];
        r.extend(self.steps_per_task.iter().map(u64::to_string));
        r.extend(self.success.iter().map(f64::to_string));
        r.push(self.success_main_easy.to_string());
        r.push(self.success_main_hard.to_string());
        r.extend(self.mean_return.iter().map(f64::to_string));
        for v in [
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.distill_loss,
            self.total_loss,
            self.lr,
            self.wall_time,
        ] {
            r.push(v.to_string());
        }
        r
    }

    /// Parses a row written by [`UpdateMetrics::record`].
    pub fn parse(fields: &[&str]) -> Result<Self, String> {
        let n = Self::header().len();
        if fields.len() != n {
            return Err(format!("expected {n} fields, got {}", fields.len()));
        }
        let f = |i: usize| fields[i].trim().parse::<f64>().map_err(|e| format!("field {i}: {e}"));
        let u = |i: usize| fields[i].trim().parse::<u64>().map_err(|e| format!("field {i}: {e}"));
        let arr_u = |s: usize| -> Result<[u64; NUM_TASKS], String> {
            let mut a = [0; NUM_TASKS];
            for (k, v) in a.iter_mut().enumerate() {
                *v = u(s + k)?;
            }
            Ok(a)
        };
        let arr_f = |s: usize| -> Result<[f64; NUM_TASKS], String> {
            let mut a = [0.0; NUM_TASKS];
            for (k, v) in a.iter_mut().enumerate() {
                *v = f(s + k)?;
            }
            Ok(a)
        };
        let t = NUM_TASKS;
        Ok(UpdateMetrics {
            update: u(0)?,
            env_steps: u(1)?,
            steps_per_task: arr_u(2)?,
            success: arr_f(2 + t)?,
            success_main_easy: f(2 + 2 * t)?,
            success_main_hard: f(3 + 2 * t)?,
            mean_return: arr_f(4 + 2 * t)?,
            policy_loss: f(4 + 3 * t)?,
            value_loss: f(5 + 3 * t)?,
            entropy: f(6 + 3 * t)?,
            distill_loss: f(7 + 3 * t)?,
            total_loss: f(8 + 3 * t)?,
            lr: f(9 + 3 * t)?,
            wall_time: f(10 + 3 * t)?,
        })
    }

    /// Equality ignoring wall-clock time.
    pub fn same_run_values(&self, other: &UpdateMetrics) -> bool {
        let strip = |m: &UpdateMetrics| UpdateMetrics { wall_time: 0.0, ..m.clone() };
        let (a, b) = (strip(self), strip(other));
        // NaN-aware comparison via the CSV rendering.
        a.record() == b.record()
    }
}

/// Rolling windows of finished episodes.
#[derive(Debug, Clone, Default)]
pub struct EpisodeWindows {
    per_task: Vec<VecDeque<(bool, f64)>>,
    main_easy: VecDeque<bool>,
    main_hard: VecDeque<bool>,
}

fn push<T>(q: &mut VecDeque<T>, v: T) {
    if q.len() == WINDOW {
        q.pop_front();
    }
    q.push_back(v);
}

fn rate(q: impl ExactSizeIterator<Item = bool>) -> f64 {
    let n = q.len();
    if n == 0 {
        return f64::NAN;
    }
    q.filter(|s| *s).count() as f64 / n as f64
}

impl EpisodeWindows {
    pub fn new() -> Self {
        EpisodeWindows { per_task: vec![VecDeque::new(); NUM_TASKS], ..Default::default() }
    }

    pub fn add(&mut self, ep: &EpisodeRecord) {
        push(&mut self.per_task[ep.task.index()], (ep.success, ep.episode_return));
        if ep.task.is_main() {
            match ep.difficulty {
                Difficulty::Easy => push(&mut self.main_easy, ep.success),
                Difficulty::Hard => push(&mut self.main_hard, ep.success),
            }
        }
    }

    pub fn success(&self) -> [f64; NUM_TASKS] {
        std::array::from_fn(|i| rate(self.per_task[i].iter().map(|e| e.0)))
    }

    pub fn mean_return(&self) -> [f64; NUM_TASKS] {
        std::array::from_fn(|i| {
            let q = &self.per_task[i];
            if q.is_empty() {
                f64::NAN
            } else {
                q.iter().map(|e| e.1).sum::<f64>() / q.len() as f64
            }
        })
    }

    pub fn main_easy(&self) -> f64 {
        rate(self.main_easy.iter().copied())
    }

    pub fn main_hard(&self) -> f64 {
        rate(self.main_hard.iter().copied())
    }
}

/// Append-only CSV sink; the header is written when the file is created.
pub struct MetricsWriter<W: Write> {
    inner: W,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut inner: W, write_header: bool) -> Result<Self, TrainError> {
        if write_header {
            writeln!(inner, "{}", UpdateMetrics::header().join(","))?;
        }
        Ok(MetricsWriter { inner })
    }

    pub fn append(&mut self, m: &UpdateMetrics) -> Result<(), TrainError> {
        writeln!(self.inner, "{}", m.record().join(","))?;
        self.inner.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> UpdateMetrics {
        UpdateMetrics {
            update: 3,
            env_steps: 15360,
            steps_per_task: [3072; NUM_TASKS],
            success: [0.5, 1.0, f64::NAN, 0.25, 0.0],
            success_main_easy: 0.75,
            success_main_hard: 0.1,
            mean_return: [1.0, 2.0, 3.0, 4.0, 5.5],
            policy_loss: -0.01,
            value_loss: 0.3,
            entropy: 1.9,
            distill_loss: 0.02,
            total_loss: 0.2,
            lr: 2.5e-4,
            wall_time: 12.5,
        }
    }

    #[test]
    fn csv_row_parses_back() {
        let m = sample();
        let rec = m.record();
        assert_eq!(rec.len(), UpdateMetrics::header().len());
        let fields: Vec<&str> = rec.iter().map(String::as_str).collect();
        let back = UpdateMetrics::parse(&fields).unwrap();
        assert!(back.same_run_values(&m));
        assert!(UpdateMetrics::parse(&fields[1..]).is_err());
    }

    #[test]
    fn windows_roll() {
        let mut w = EpisodeWindows::new();
        assert!(w.success()[0].is_nan());
        for i in 0..150 {
            w.add(&EpisodeRecord {
                task: TaskId::MAIN,
                difficulty: if i % 2 == 0 { Difficulty::Easy } else { Difficulty::Hard },
                seed: i,
                success: i >= 100,
                episode_return: 1.0,
            });
        }
        assert_eq!(w.success()[0], 0.5);
        // 75 episodes per difficulty, 25 of them successful.
        assert!((w.main_easy() - 1.0 / 3.0).abs() < 1e-12);
        assert!((w.main_hard() - 1.0 / 3.0).abs() < 1e-12);
    }
}
