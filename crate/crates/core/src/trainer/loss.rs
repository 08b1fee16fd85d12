//! Per-minibatch losses: clipped PPO surrogate, value regression and entropy
//! per task, plus the relevance-weighted distillation term. Gradients are
//! computed analytically with respect to logits/values and pushed through the
//! network.

use serde::{Deserialize, Serialize};

use crate::env::{TaskId, NUM_TASKS};
use crate::nn::{
    backward_into, entropy, entropy_grad, forward, kl_categorical, kl_categorical_grads, log_softmax, PolicyParams,
    Tensor2,
};
use crate::relevance::RelevanceVector;

use super::config::TrainConfig;
use super::TrainError;

pub const ADV_EPS: f64 = 1e-8;

/// Training rows for one gradient step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minibatch {
    pub obs: Tensor2,
    pub tasks: Vec<TaskId>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    /// Advantages on the normalized return scale, not yet standardized.
    pub advantages: Vec<f64>,
    /// Normalized return targets for each row's own value slot.
    pub value_targets: Vec<f64>,
    /// Present on main-task rows only.
    pub relevance: Vec<Option<RelevanceVector>>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskLoss {
    pub rows: usize,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// `policy + value_coef * value - entropy_coef * entropy`.
    pub rl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub per_task: Vec<TaskLoss>,
    /// Relevance-weighted KL, averaged over main rows and divided by the
    /// distillation divisor.
    pub distill: f64,
    pub rl_divisor: f64,
    pub lambda: f64,
    /// `sum(per_task.rl) / rl_divisor`.
    pub rl_total: f64,
    pub total: f64,
}

impl LossReport {
    /// Absolute gap between `total` and its recomposition from the parts.
    pub fn decomposition_error(&self) -> f64 {
        let rl: f64 = self.per_task.iter().map(|t| t.rl).sum::<f64>() / self.rl_divisor;
        (self.total - (rl + self.lambda * self.distill)).abs()
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.distill.is_finite()
    }
}

/// Mean zero, unit (population) standard deviation.
pub fn standardize(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return vec![];
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    x.iter().map(|v| (v - mean) / (std + ADV_EPS)).collect()
}

/// Clipped surrogate objective `min(r A, clip(r, 1-eps, 1+eps) A)` and its
/// derivative with respect to the log-probability of the taken action.
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> (f64, f64) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    let in_range = (1.0 - eps..=1.0 + eps).contains(&ratio);
    let obj = unclipped.min(clipped);
    let dobj = if unclipped <= clipped || in_range { ratio * adv } else { 0.0 };
    (obj, dobj)
}

/// Copy of `obs` with the trailing task-indicator block set to `task`.
fn with_indicator(row: &[f64], n_tasks: usize, task: TaskId) -> Vec<f64> {
    let mut out = row.to_vec();
    let start = row.len() - n_tasks;
    out[start..].iter_mut().for_each(|v| *v = 0.0);
    out[start + task.index()] = 1.0;
    out
}

/// Loss of `mb` under `params`, optionally with the gradient of `total`.
#[allow(clippy::needless_range_loop)]
pub fn minibatch_loss(
    params: &PolicyParams,
    mb: &Minibatch,
    cfg: &TrainConfig,
    want_grad: bool,
) -> Result<(LossReport, Option<PolicyParams>), TrainError> {
    let dims = params.dims();
    let n_tasks = dims.n_values;
    let rows = mb.len();
    let (out, cache) = forward(params, &mb.obs)?;
    let adv = standardize(&mb.advantages);
    let div = cfg.rl_divisor();

    let mut counts = vec![0usize; n_tasks.max(NUM_TASKS)];
    for t in &mb.tasks {
        counts[t.index()] += 1;
    }
    let mut per_task = vec![TaskLoss::default(); n_tasks];
    let mut dlogits = Tensor2::zeros(rows, dims.n_actions);
    let mut dvalues = Tensor2::zeros(rows, n_tasks);

    for r in 0..rows {
        let t = mb.tasks[r].index();
        let n_t = counts[t] as f64;
        let logits = out.logits.row(r);
        let lp = log_softmax(logits);
        let a = mb.actions[r];
        let ratio = (lp[a] - mb.old_log_probs[r]).exp();
        let (obj, dobj) = clipped_surrogate(ratio, adv[r], cfg.clip_eps);
        let h = entropy(logits);
        let err = out.values.get(r, t) - mb.value_targets[r];

        let tl = &mut per_task[t];
        tl.rows += 1;
        tl.policy -= obj / n_t;
        tl.entropy += h / n_t;
        tl.value += err * err / n_t;

        if want_grad {
            let scale = 1.0 / (div * n_t);
            let dh = entropy_grad(logits);
            let g = dlogits.row_mut(r);
            for k in 0..dims.n_actions {
                let onehot = if k == a { 1.0 } else { 0.0 };
                g[k] += scale * (-dobj * (onehot - lp[k].exp()) - cfg.entropy_coef * dh[k]);
            }
            dvalues.set(r, t, scale * cfg.value_coef * 2.0 * err);
        }
    }
    for tl in &mut per_task {
        tl.rl = tl.policy + cfg.value_coef * tl.value - cfg.entropy_coef * tl.entropy;
    }
    let rl_total = per_task.iter().map(|t| t.rl).sum::<f64>() / div;

    let mut grads = want_grad.then(|| PolicyParams::zeros(dims));
    let distill = if cfg.lambda > 0.0 {
        distill_term(params, mb, &out.logits, cfg, grads.as_mut().map(|g| (g, &mut dlogits)))?
    } else {
        0.0
    };
    if let Some(g) = grads.as_mut() {
        backward_into(params, &cache, &dlogits, &dvalues, g)?;
    }
    let report = LossReport {
        per_task,
        distill,
        rl_divisor: div,
        lambda: cfg.lambda,
        rl_total,
        total: rl_total + cfg.lambda * distill,
    };
    Ok((report, grads))
}

/// Relevance-weighted KL between each main row's own policy and the policy
/// obtained by swapping in the relevant auxiliary indicator. When `grad` is
/// given, accumulates `lambda * d(term)` into the main logits gradient and
/// backpropagates the auxiliary branch directly into the parameter gradient.
fn distill_term(
    params: &PolicyParams,
    mb: &Minibatch,
    main_logits: &Tensor2,
    cfg: &TrainConfig,
    grad: Option<(&mut PolicyParams, &mut Tensor2)>,
) -> Result<f64, TrainError> {
    let n_tasks = params.dims().n_values;
    let main_rows = mb.tasks.iter().filter(|t| t.is_main()).count();
    if main_rows == 0 {
        return Ok(0.0);
    }
    // (row, aux task, weight) triples with non-zero weight.
    let pairs: Vec<(usize, TaskId, f64)> = mb
        .relevance
        .iter()
        .enumerate()
        .filter(|(r, _)| mb.tasks[*r].is_main())
        .filter_map(|(r, w)| w.as_ref().map(|w| (r, w)))
        .flat_map(|(r, w)| w.active().map(move |(t, wt)| (r, t, wt)).collect::<Vec<_>>())
        .collect();
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let swapped: Vec<Vec<f64>> = pairs.iter().map(|(r, t, _)| with_indicator(mb.obs.row(*r), n_tasks, *t)).collect();
    let swapped = Tensor2::from_rows(&swapped);
    let (aux_out, aux_cache) = forward(params, &swapped)?;

    let norm = 1.0 / (main_rows as f64 * cfg.distill_divisor());
    let mut total = 0.0;
    for (k, (r, _, w)) in pairs.iter().enumerate() {
        total += w * kl_categorical(main_logits.row(*r), aux_out.logits.row(k));
    }
    total *= norm;

    if let Some((grads, dlogits)) = grad {
        let mut daux = Tensor2::zeros(pairs.len(), params.dims().n_actions);
        for (k, (r, _, w)) in pairs.iter().enumerate() {
            let (dp, dq) = kl_categorical_grads(main_logits.row(*r), aux_out.logits.row(k));
            let s = cfg.lambda * w * norm;
            for (g, d) in dlogits.row_mut(*r).iter_mut().zip(&dp) {
                *g += s * d;
            }
            if !cfg.distill_stop_gradient {
                for (g, d) in daux.row_mut(k).iter_mut().zip(&dq) {
                    *g = s * d;
                }
            }
        }
        if !cfg.distill_stop_gradient {
            let dv = Tensor2::zeros(pairs.len(), n_tasks);
            backward_into(params, &aux_cache, &daux, &dv, grads)?;
        }
    }
    Ok(total)
}
