use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use super::NnError;

/// Shape of the policy network: two tanh hidden layers, a logit head and a
/// per-task value head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetDims {
    pub obs_dim: usize,
    pub hidden: usize,
    pub n_actions: usize,
    pub n_values: usize,
}

impl NetDims {
    pub fn layer_shapes(&self) -> [(usize, usize); 4] {
        [
            (self.obs_dim, self.hidden),
            (self.hidden, self.hidden),
            (self.hidden, self.n_actions),
            (self.hidden, self.n_values),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

const ENC1: usize = 0;
const ENC2: usize = 1;
const POLICY: usize = 2;
const VALUE: usize = 3;

/// All weights in one flat buffer. The same type doubles as a gradient.
///
/// Per layer, the weight block is `in x out` row-major followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    dims: NetDims,
    data: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(dims: NetDims) -> Self {
        PolicyParams { dims, data: vec![0.0; dims.param_count()] }
    }

    /// Scaled-uniform init: variance `gain^2 / fan_in`, gain sqrt(2) on the
    /// hidden layers, 0.01 on the logit head, 1.0 on the value head. Biases zero.
    pub fn init<R: Rng>(dims: NetDims, rng: &mut R) -> Self {
        let mut p = PolicyParams::zeros(dims);
        let gains = [2f64.sqrt(), 2f64.sqrt(), 0.01, 1.0];
        for (layer, gain) in gains.into_iter().enumerate() {
            let fan_in = dims.layer_shapes()[layer].0 as f64;
            let bound = gain * (3.0 / fan_in).sqrt();
            let range = p.weight_range(layer);
            for w in &mut p.data[range] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        p
    }

    pub fn from_flat(dims: NetDims, data: Vec<f64>) -> Result<Self, NnError> {
        if data.len() != dims.param_count() {
            return Err(NnError::Shape(format!("expected {} parameters, got {}", dims.param_count(), data.len())));
        }
        Ok(PolicyParams { dims, data })
    }

    pub fn dims(&self) -> NetDims {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn offset(&self, layer: usize) -> usize {
        self.dims.layer_shapes()[..layer].iter().map(|(i, o)| i * o + o).sum()
    }

    pub(crate) fn weight_range(&self, layer: usize) -> Range<usize> {
        let (i, o) = self.dims.layer_shapes()[layer];
        let start = self.offset(layer);
        start..start + i * o
    }

    pub(crate) fn bias_range(&self, layer: usize) -> Range<usize> {
        let (i, o) = self.dims.layer_shapes()[layer];
        let start = self.offset(layer) + i * o;
        start..start + o
    }

    fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        (&self.data[self.weight_range(layer)], &self.data[self.bias_range(layer)])
    }

    /// Multiplies the value-head column `slot` by `scale` and sets its bias.
    /// Used by return normalization to keep denormalized outputs fixed.
    pub fn rescale_value_slot(&mut self, slot: usize, scale: f64, new_bias: f64) {
        let n = self.dims.n_values;
        let wr = self.weight_range(VALUE);
        for w in self.data[wr].iter_mut().skip(slot).step_by(n) {
            *w *= scale;
        }
        let br = self.bias_range(VALUE);
        self.data[br][slot] = new_bias;
    }

    pub fn value_bias(&self, slot: usize) -> f64 {
        self.data[self.bias_range(VALUE)][slot]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn add_assign(&mut self, other: &PolicyParams) {
        assert_eq!(self.dims, other.dims);
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub logits: Tensor2,
    pub values: Tensor2,
}

/// Activations kept from [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Tensor2,
    h1: Tensor2,
    h2: Tensor2,
}

fn linear(x: &Tensor2, w: &[f64], b: &[f64], out_dim: usize) -> Tensor2 {
    let mut out = Tensor2::zeros(x.rows(), out_dim);
    for r in 0..x.rows() {
        let o = out.row_mut(r);
        o.copy_from_slice(b);
        for (k, &xk) in x.row(r).iter().enumerate() {
            if xk == 0.0 {
                continue;
            }
            let wk = &w[k * out_dim..(k + 1) * out_dim];
            for (oj, wj) in o.iter_mut().zip(wk) {
                *oj += xk * wj;
            }
        }
    }
    out
}

/// Accumulates dW += x^T g and db += sum(g); returns g W^T when `want_input`.
fn linear_backward(
    x: &Tensor2,
    g: &Tensor2,
    w: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    want_input: bool,
) -> Option<Tensor2> {
    let out_dim = g.cols();
    let mut dx = want_input.then(|| Tensor2::zeros(x.rows(), x.cols()));
    for r in 0..x.rows() {
        let gr = g.row(r);
        if gr.iter().all(|v| *v == 0.0) {
            continue;
        }
        for (dbj, gj) in db.iter_mut().zip(gr) {
            *dbj += gj;
        }
        for (k, &xk) in x.row(r).iter().enumerate() {
            let wk = &w[k * out_dim..(k + 1) * out_dim];
            if let Some(dx) = dx.as_mut() {
                dx.row_mut(r)[k] = wk.iter().zip(gr).map(|(a, b)| a * b).sum();
            }
            if xk != 0.0 {
                let dwk = &mut dw[k * out_dim..(k + 1) * out_dim];
                for (d, gj) in dwk.iter_mut().zip(gr) {
                    *d += xk * gj;
                }
            }
        }
    }
    dx
}

fn tanh_in_place(t: &mut Tensor2) {
    t.data_mut().iter_mut().for_each(|v| *v = v.tanh());
}

fn tanh_backward(h: &Tensor2, g: &mut Tensor2) {
    for (gi, hi) in g.data_mut().iter_mut().zip(h.data()) {
        *gi *= 1.0 - hi * hi;
    }
}

pub fn forward(params: &PolicyParams, obs: &Tensor2) -> Result<(PolicyOutput, ForwardCache), NnError> {
    let d = params.dims;
    if obs.cols() != d.obs_dim {
        return Err(NnError::Shape(format!("obs has {} columns, net expects {}", obs.cols(), d.obs_dim)));
    }
    let (w, b) = params.layer(ENC1);
    let mut h1 = linear(obs, w, b, d.hidden);
    tanh_in_place(&mut h1);
    let (w, b) = params.layer(ENC2);
    let mut h2 = linear(&h1, w, b, d.hidden);
    tanh_in_place(&mut h2);
    let (w, b) = params.layer(POLICY);
    let logits = linear(&h2, w, b, d.n_actions);
    let (w, b) = params.layer(VALUE);
    let values = linear(&h2, w, b, d.n_values);
    Ok((PolicyOutput { logits, values }, ForwardCache { input: obs.clone(), h1, h2 }))
}

/// Reverse-mode gradient of `sum(dlogits * logits) + sum(dvalues * values)`,
/// added into `grads`.
pub fn backward_into(
    params: &PolicyParams,
    cache: &ForwardCache,
    dlogits: &Tensor2,
    dvalues: &Tensor2,
    grads: &mut PolicyParams,
) -> Result<(), NnError> {
    let d = params.dims;
    let rows = cache.input.rows();
    if dlogits.rows() != rows || dvalues.rows() != rows || dlogits.cols() != d.n_actions || dvalues.cols() != d.n_values
    {
        return Err(NnError::Shape("upstream gradient shape does not match forward batch".into()));
    }
    if grads.dims != d {
        return Err(NnError::Shape("gradient buffer has different dims".into()));
    }
    let g = &mut grads.data;
    let mut dh2 = {
        let (wr, br) = (params.weight_range(POLICY), params.bias_range(POLICY));
        let (dw, db) = two_ranges(g, wr, br);
        linear_backward(&cache.h2, dlogits, params.layer(POLICY).0, dw, db, true).unwrap()
    };
    {
        let (wr, br) = (params.weight_range(VALUE), params.bias_range(VALUE));
        let (dw, db) = two_ranges(g, wr, br);
        let dv = linear_backward(&cache.h2, dvalues, params.layer(VALUE).0, dw, db, true).unwrap();
        for (a, b) in dh2.data_mut().iter_mut().zip(dv.data()) {
            *a += b;
        }
    }
    tanh_backward(&cache.h2, &mut dh2);
    let mut dh1 = {
        let (wr, br) = (params.weight_range(ENC2), params.bias_range(ENC2));
        let (dw, db) = two_ranges(g, wr, br);
        linear_backward(&cache.h1, &dh2, params.layer(ENC2).0, dw, db, true).unwrap()
    };
    tanh_backward(&cache.h1, &mut dh1);
    let (wr, br) = (params.weight_range(ENC1), params.bias_range(ENC1));
    let (dw, db) = two_ranges(g, wr, br);
    linear_backward(&cache.input, &dh1, params.layer(ENC1).0, dw, db, false);
    Ok(())
}

pub fn backward(
    params: &PolicyParams,
    cache: &ForwardCache,
    dlogits: &Tensor2,
    dvalues: &Tensor2,
) -> Result<PolicyParams, NnError> {
    let mut grads = PolicyParams::zeros(params.dims);
    backward_into(params, cache, dlogits, dvalues, &mut grads)?;
    Ok(grads)
}

/// Disjoint mutable views of a weight range followed by its bias range.
fn two_ranges(g: &mut [f64], w: Range<usize>, b: Range<usize>) -> (&mut [f64], &mut [f64]) {
    debug_assert_eq!(w.end, b.start);
    let (left, right) = g[w.start..b.end].split_at_mut(w.end - w.start);
    (left, right)
}
