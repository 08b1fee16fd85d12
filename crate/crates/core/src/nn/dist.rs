//! Categorical distribution helpers over logit vectors.

use rand::Rng;

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// KL(softmax(p) || softmax(q)), evaluated in log space. Clamped at zero
/// against round-off.
pub fn kl_categorical(p_logits: &[f64], q_logits: &[f64]) -> f64 {
    assert_eq!(p_logits.len(), q_logits.len(), "kl over different supports");
    let lp = log_softmax(p_logits);
    let lq = log_softmax(q_logits);
    let kl: f64 = lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum();
    kl.max(0.0)
}

/// Gradients of KL(softmax(p) || softmax(q)) with respect to both logit vectors.
pub fn kl_categorical_grads(p_logits: &[f64], q_logits: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lp = log_softmax(p_logits);
    let lq = log_softmax(q_logits);
    let p: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
    let q: Vec<f64> = lq.iter().map(|v| v.exp()).collect();
    let kl: f64 = p.iter().zip(lp.iter().zip(&lq)).map(|(pi, (a, b))| pi * (a - b)).sum();
    let dp = p.iter().zip(lp.iter().zip(&lq)).map(|(pi, (a, b))| pi * (a - b - kl)).collect();
    let dq = q.iter().zip(&p).map(|(qi, pi)| qi - pi).collect();
    (dp, dq)
}

pub fn entropy(logits: &[f64]) -> f64 {
    log_softmax(logits).iter().map(|l| -l.exp() * l).sum()
}

/// d entropy / d logits.
pub fn entropy_grad(logits: &[f64]) -> Vec<f64> {
    let lp = log_softmax(logits);
    let h: f64 = lp.iter().map(|l| -l.exp() * l).sum();
    lp.iter().map(|l| -l.exp() * (l + h)).collect()
}

/// Inverse-CDF sample; returns the action and its log-probability.
pub fn sample_action<R: Rng>(logits: &[f64], rng: &mut R) -> (usize, f64) {
    let lp = log_softmax(logits);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, l) in lp.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            return (a, *l);
        }
    }
    // u landed in the round-off gap above the last cumulative sum.
    let last = lp.len() - 1;
    (last, lp[last])
}

pub fn argmax(logits: &[f64]) -> usize {
    logits.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, v)| if *v > best.1 { (i, *v) } else { best }).0
}
