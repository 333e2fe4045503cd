//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsegen::{LabelDistribution, ScoreVector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sv(v: &[f64]) -> ScoreVector {
    ScoreVector::new(v.to_vec()).unwrap()
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_labels(rng: &mut ChaCha8Rng, k: usize) -> LabelDistribution {
    let count = rng.random_range(1..=k);
    let on = rand::seq::index::sample(rng, k, count).into_vec();
    LabelDistribution::from_on_set(k, &on).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Minimizer of `||p - z||^2 - lambda ||p||^2` over the simplex, found by
/// solving the stationarity conditions on every nonempty candidate support
/// and keeping the feasible candidate with the smallest objective.
pub fn kkt_minimizer(z: &[f64], lambda: f64) -> Vec<f64> {
    let k = z.len();
    assert!(k <= 16);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << k) {
        let members: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let sum: f64 = members.iter().map(|&i| z[i]).sum();
        let tau = (sum - 1.0 + lambda) / members.len() as f64;
        let mut p = vec![0.0; k];
        for &i in &members {
            p[i] = (z[i] - tau) / (1.0 - lambda);
        }
        if p.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let objective: f64 = p
            .iter()
            .zip(z)
            .map(|(pi, zi)| (pi - zi) * (pi - zi) - lambda * pi * pi)
            .sum();
        if best.as_ref().is_none_or(|(b, _)| objective < *b) {
            best = Some((objective, p));
        }
    }
    best.expect("the singleton support at the argmax is always feasible")
        .1
}

/// Sparsemax loss as a Fenchel-Young gap:
/// `p.z - ||p||^2 / 2 - eta.z + ||eta||^2 / 2` with `p` the projection of `z`.
pub fn huber_oracle(z: &[f64], eta: &[f64]) -> f64 {
    let p = kkt_minimizer(z, 0.0);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    dot(&p, z) - 0.5 * dot(&p, &p) - dot(eta, z) + 0.5 * dot(eta, eta)
}
