use serde::{Deserialize, Serialize};

use crate::nn::PolicyParams;

pub const MIN_SIGMA: f64 = 1e-4;

/// Per-task adaptive return normalization.
///
/// First and second moments are exponential moving averages with step `beta`,
/// divided by the accumulated weight `debias` so early estimates are not
/// pulled toward the zero initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopArtState {
    pub beta: f64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub debias: Vec<f64>,
}

impl PopArtState {
    pub fn new(n_tasks: usize, beta: f64) -> Self {
        PopArtState { beta, first: vec![0.0; n_tasks], second: vec![0.0; n_tasks], debias: vec![0.0; n_tasks] }
    }

    pub fn n_tasks(&self) -> usize {
        self.first.len()
    }

    /// Current return mean for `task` (0 before any data).
    pub fn mu(&self, task: usize) -> f64 {
        if self.debias[task] > 0.0 {
            self.first[task] / self.debias[task]
        } else {
            0.0
        }
    }

    /// Current second moment for `task` (1 before any data).
    pub fn nu(&self, task: usize) -> f64 {
        if self.debias[task] > 0.0 {
            self.second[task] / self.debias[task]
        } else {
            1.0
        }
    }

    pub fn sigma(&self, task: usize) -> f64 {
        let mu = self.mu(task);
        (self.nu(task) - mu * mu).max(0.0).sqrt().max(MIN_SIGMA)
    }

    pub fn normalize(&self, task: usize, x: f64) -> f64 {
        (x - self.mu(task)) / self.sigma(task)
    }

    pub fn denormalize(&self, task: usize, x: f64) -> f64 {
        x * self.sigma(task) + self.mu(task)
    }

    /// Folds one batch of returns for `task` into the statistics and rescales
    /// value slot `task` of `params` so its denormalized output is unchanged.
    /// Empty batches are ignored.
    pub fn update(&mut self, task: usize, returns: &[f64], params: &mut PolicyParams) {
        if returns.is_empty() {
            return;
        }
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let mean_sq = returns.iter().map(|g| g * g).sum::<f64>() / n;
        let (mu_old, sigma_old) = (self.mu(task), self.sigma(task));
        let b = self.beta;
        self.first[task] = (1.0 - b) * self.first[task] + b * mean;
        self.second[task] = (1.0 - b) * self.second[task] + b * mean_sq;
        self.debias[task] = (1.0 - b) * self.debias[task] + b;
        let (mu_new, sigma_new) = (self.mu(task), self.sigma(task));
        let bias = params.value_bias(task);
        params.rescale_value_slot(task, sigma_old / sigma_new, (sigma_old * bias + mu_old - mu_new) / sigma_new);
    }
}
