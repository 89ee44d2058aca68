//! Seeded instance families shared by the integration tests.
#![allow(dead_code)]

use fwbb::model::{MeanRiskInstance, RiskWeighting, SimplexProblem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small instance whose integer domains are within {0, 1, 2}: prices in
/// [1, 2) and a budget below three times the cheapest price.
pub fn small_instance(seed: u64, n: usize, n_int: usize) -> MeanRiskInstance {
    let mut rng = rng(seed);
    let k = 2.min(n);
    let f = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
    let mut m = &f * f.transpose() * 0.25;
    for i in 0..n {
        m[(i, i)] += rng.random_range(0.05..0.3);
    }
    let r: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.5)).collect();
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
    let amin = a.iter().copied().fold(f64::INFINITY, f64::min);
    let b = rng.random_range(1.2..2.95) * amin;
    MeanRiskInstance::new(r, a, b, m, (0..n_int).collect()).unwrap()
}

/// The three risk functions of the end-to-end checks.
pub fn risks() -> [RiskWeighting; 3] {
    [
        RiskWeighting::linear_from_confidence(0.95).unwrap(),
        RiskWeighting::Quadratic { omega: 1.0 },
        RiskWeighting::ExpThreshold { gamma: 1.0 },
    ]
}

/// Criterion-1 family: seeds 0..100 cycling through n in {3..6} and both
/// integer-set sizes.
pub fn oracle_family() -> Vec<(u64, MeanRiskInstance)> {
    (0..100u64)
        .map(|s| {
            let n = 3 + (s % 4) as usize;
            let n_int = if (s / 4) % 2 == 0 { n / 2 } else { n };
            (s, small_instance(1000 + s, n, n_int))
        })
        .collect()
}

/// Random SPD matrix `U diag(lambda) U'` with eigenvalues in `[lo, hi]`.
pub fn spd(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let qr = g.qr();
    let u = qr.q();
    let lam = DVector::from_fn(dim, |_, _| rng.random_range(lo..hi));
    &u * DMatrix::from_diagonal(&lam) * u.transpose()
}

/// Quadratic-h problem with a prescribed interior optimum `z_star`:
/// `mu = 2 omega Q z_star` makes the gradient vanish there.
pub fn interior_quadratic(rng: &mut ChaCha8Rng, dim: usize) -> (SimplexProblem, DVector<f64>) {
    let q = spd(rng, dim, 1.0, 10.0);
    let w = DVector::from_fn(dim, |_, _| rng.random_range(0.2..1.0));
    let z_star = &w / (w.sum() * rng.random_range(1.5..4.0));
    let omega = 1.0;
    let mu = &q * &z_star * (2.0 * omega);
    let p = SimplexProblem::new(
        q,
        DVector::zeros(dim),
        0.0,
        mu,
        0.0,
        RiskWeighting::Quadratic { omega },
    )
    .unwrap();
    (p, z_star)
}

/// Generic relaxation with moderate conditioning, optional linear and
/// constant terms under the root.
pub fn relaxation(rng: &mut ChaCha8Rng, dim: usize, h: RiskWeighting, smooth: bool) -> SimplexProblem {
    let q = spd(rng, dim, 0.5, 5.0);
    let mu = DVector::from_fn(dim, |_, _| rng.random_range(-0.5..2.0));
    let (c, d) = if smooth {
        (DVector::from_fn(dim, |_, _| rng.random_range(0.0..0.2)), rng.random_range(0.1..1.0))
    } else {
        (DVector::zeros(dim), 0.0)
    };
    SimplexProblem::new(q, c, d, mu, 0.0, h).unwrap()
}
