mod common;

use auxdistill_core::nn::{backward, forward, NetDims, PolicyParams, Tensor2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIMS: NetDims = NetDims { obs_dim: 13, hidden: 16, n_actions: 7, n_values: 5 };

/// `sum(c_l * logits) + sum(c_v * values)`, whose parameter gradient is the
/// backward pass with upstream gradients `c_l`, `c_v`.
fn probe(params: &PolicyParams, obs: &Tensor2, cl: &Tensor2, cv: &Tensor2) -> f64 {
    let (out, _) = forward(params, obs).unwrap();
    let dot = |a: &Tensor2, b: &Tensor2| a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum::<f64>();
    dot(&out.logits, cl) + dot(&out.values, cv)
}

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor2 {
    Tensor2::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

#[test]
fn backward_matches_central_differences_over_seeds() {
    let h = 1e-5;
    for seed in 0..24 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = PolicyParams::init(DIMS, &mut rng);
        // Larger policy/value weights than the init so every block carries signal.
        let params =
            PolicyParams::from_flat(DIMS, params.as_slice().iter().map(|v| v + rng.gen_range(-0.3..0.3)).collect())
                .unwrap();
        let obs = random(4, DIMS.obs_dim, &mut rng);
        let cl = random(4, DIMS.n_actions, &mut rng);
        let cv = random(4, DIMS.n_values, &mut rng);
        let (_, cache) = forward(&params, &obs).unwrap();
        let g = backward(&params, &cache, &cl, &cv).unwrap();
        for i in 0..params.as_slice().len() {
            let mut a = params.clone();
            let mut b = params.clone();
            a.as_mut_slice()[i] += h;
            b.as_mut_slice()[i] -= h;
            let fd = (probe(&a, &obs, &cl, &cv) - probe(&b, &obs, &cl, &cv)) / (2.0 * h);
            let an = g.as_slice()[i];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-5);
            assert!(rel < 1e-4, "seed {seed} param {i}: fd {fd:e} analytic {an:e}");
        }
    }
}

#[test]
fn forward_matches_reference_and_is_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let params = PolicyParams::init(DIMS, &mut rng);
        let obs = random(6, DIMS.obs_dim, &mut rng);
        let (a, _) = forward(&params, &obs).unwrap();
        let (b, _) = forward(&params, &obs).unwrap();
        assert_eq!(a, b);
        for r in 0..6 {
            let (l, v) = common::reference_forward(&params, obs.row(r));
            for (x, y) in l.iter().zip(a.logits.row(r)) {
                assert!((x - y).abs() < 1e-12);
            }
            for (x, y) in v.iter().zip(a.values.row(r)) {
                assert!((x - y).abs() < 1e-12);
            }
            let s: f64 = common::probs(a.logits.row(r)).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn parameter_count_depends_only_on_shape() {
    let mut r1 = ChaCha8Rng::seed_from_u64(1);
    let mut r2 = ChaCha8Rng::seed_from_u64(2);
    let a = PolicyParams::init(DIMS, &mut r1);
    let b = PolicyParams::init(DIMS, &mut r2);
    assert_eq!(a.as_slice().len(), b.as_slice().len());
    assert_eq!(a.as_slice().len(), DIMS.param_count());
}
