#![allow(dead_code)]

use auxdistill_core::nn::PolicyParams;

/// Straight-line forward pass over the flat parameter layout: for each layer
/// an `in x out` row-major weight block followed by `out` biases.
pub fn reference_forward(params: &PolicyParams, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = params.dims();
    let p = params.as_slice();
    let mut off = 0;
    let mut dense = |x: &[f64], n_out: usize, act: bool| -> Vec<f64> {
        let n_in = x.len();
        let mut y = vec![0.0; n_out];
        for j in 0..n_out {
            let mut s = p[off + n_in * n_out + j];
            for i in 0..n_in {
                s += x[i] * p[off + i * n_out + j];
            }
            y[j] = if act { s.tanh() } else { s };
        }
        off += n_in * n_out + n_out;
        y
    };
    let h1 = dense(x, d.hidden, true);
    let h2 = dense(&h1, d.hidden, true);
    let logits = dense(&h2, d.n_actions, false);
    let values = dense(&h2, d.n_values, false);
    (logits, values)
}

pub fn probs(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::MIN, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn kl(p_logits: &[f64], q_logits: &[f64]) -> f64 {
    let (p, q) = (probs(p_logits), probs(q_logits));
    p.iter().zip(&q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}
