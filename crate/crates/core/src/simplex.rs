//! Closed-form solution of the regularized simplex projection
//!
//! ```text
//! p* = argmin_{p in simplex} ||p - g||^2 - lambda ||p||^2,   lambda < 1
//! ```
//!
//! The minimizer is `p_i = [(g_i - tau) / (1 - lambda)]_+` where the support
//! size is the largest `k` with `1 - lambda + k g_(k) > sum_{j<=k} g_(j)` over
//! the descending order statistics of `g`. `lambda = 0` is the Euclidean
//! projection onto the probability simplex.
//!
//! Two routes find the support: a stable sort (O(K log K)) and a seeded
//! randomized-pivot partition (expected O(K)). Both share the same
//! finalization step, so identical supports give bit-identical outputs.

use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// A finite, non-empty vector of real scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Indices attaining the maximum score, ascending.
    pub fn argmax_set(&self) -> Vec<usize> {
        let max = self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..self.0.len()).filter(|&i| self.0[i] == max).collect()
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ScoreVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl TryFrom<&[f64]> for ScoreVector {
    type Error = Error;

    fn try_from(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }
}

/// Threshold `tau` and support set of the closed-form solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub tau: f64,
    /// Support indices, ascending.
    pub support: Vec<usize>,
}

impl ThresholdResult {
    pub fn support_size(&self) -> usize {
        self.support.len()
    }
}

/// A point on the probability simplex together with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
    support: Vec<usize>,
}

impl ProbabilityVector {
    /// Wraps probabilities computed by a mapping; the support is the set of
    /// strictly positive entries.
    pub(crate) fn from_probs(probs: Vec<f64>) -> Self {
        let support = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
        Self { probs, support }
    }

    /// Validates an externally supplied distribution (non-negative entries
    /// summing to one within `1e-9`).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(i) = probs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::domain("probabilities must be non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::domain(format!(
                "probabilities must sum to 1 (sum = {total})"
            )));
        }
        Ok(Self::from_probs(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl Deref for ProbabilityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.probs
    }
}

/// Tolerance for sum-to-one checks.
pub const SUM_TOL: f64 = 1e-9;

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLambda(lambda))
    }
}

/// Threshold and support of `argmin ||p - g||^2 - lambda ||p||^2` over the
/// simplex.
pub fn threshold_and_support(g: &ScoreVector, lambda: f64) -> Result<ThresholdResult> {
    check_lambda(lambda)?;
    Ok(threshold_sorted(g, lambda))
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(v: &ScoreVector) -> ProbabilityVector {
    solve_sorted(v, 0.0)
}

/// Euclidean projection onto the probability simplex using randomized pivot
/// partitioning in expected linear time. Output matches [`project_to_simplex`].
pub fn project_to_simplex_pivot(v: &ScoreVector, seed: u64) -> ProbabilityVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = support_by_pivot(v, 1.0, &mut rng);
    let (_, probs) = finalize(v, &support, 1.0);
    ProbabilityVector::from_probs(probs)
}

/// Closed-form solution for an already validated `g` and `lambda`.
pub(crate) fn solve_sorted(g: &[f64], lambda: f64) -> ProbabilityVector {
    let slack = 1.0 - lambda;
    let support = support_by_sort(g, slack);
    let (_, probs) = finalize(g, &support, slack);
    ProbabilityVector::from_probs(probs)
}

pub(crate) fn threshold_sorted(g: &[f64], lambda: f64) -> ThresholdResult {
    let slack = 1.0 - lambda;
    let support = support_by_sort(g, slack);
    let (tau, _) = finalize(g, &support, slack);
    ThresholdResult { tau, support }
}

/// Indices of `g` in descending order of value, ties by original position.
fn descending_order(g: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.len()).collect();
    // total_cmp is safe here: inputs are finite
    order.sort_by(|&a, &b| g[b].total_cmp(&g[a]));
    order
}

/// Support of the solution, ascending. `slack = 1 - lambda > 0`.
fn support_by_sort(g: &[f64], slack: f64) -> Vec<usize> {
    let order = descending_order(g);
    // excess = sum over the first `rank + 1` sorted entries of (g_j - g_rank)
    let mut excess = 0.0;
    let mut k = 0;
    for (rank, pair) in order.windows(2).enumerate() {
        if slack > excess {
            k = rank + 1;
        }
        excess += (rank + 1) as f64 * (g[pair[0]] - g[pair[1]]);
    }
    if slack > excess {
        k = order.len();
    }
    let mut support = order[..k].to_vec();
    support.sort_unstable();
    support
}

/// Support via randomized pivot selection; no full sort.
fn support_by_pivot(g: &[f64], slack: f64, rng: &mut impl Rng) -> Vec<usize> {
    let mut candidates: Vec<usize> = (0..g.len()).collect();
    let mut upper = Vec::with_capacity(g.len());
    let mut lower = Vec::with_capacity(g.len());
    // accepted entries and their total excess over `cutoff`
    let mut acc_count = 0usize;
    let mut acc_excess = 0.0;
    let mut cutoff = f64::INFINITY;

    while !candidates.is_empty() {
        let pivot = g[candidates[rng.random_range(0..candidates.len())]];
        upper.clear();
        lower.clear();
        let mut upper_excess = 0.0;
        for &i in &candidates {
            if g[i] >= pivot {
                upper.push(i);
                upper_excess += g[i] - pivot;
            } else {
                lower.push(i);
            }
        }
        let shift = if acc_count == 0 {
            0.0
        } else {
            acc_count as f64 * (cutoff - pivot)
        };
        let excess = acc_excess + shift + upper_excess;
        if slack > excess {
            // pivot and everything above it belongs to the support
            acc_excess = excess;
            acc_count += upper.len();
            cutoff = pivot;
            std::mem::swap(&mut candidates, &mut lower);
        } else {
            // pivot fails, and so do its ties and everything below it
            candidates.clear();
            candidates.extend(upper.iter().copied().filter(|&i| g[i] > pivot));
        }
    }

    (0..g.len()).filter(|&i| g[i] >= cutoff).collect()
}

/// Returns `(tau, probs)` for a given support (ascending indices).
///
/// Uses `p_i = 1/k + (g_i - mean_S g) / slack`, algebraically equal to
/// `(g_i - tau) / slack` but free of the cancellation in `g_i - tau` when
/// `slack` is small.
fn finalize(g: &[f64], support: &[usize], slack: f64) -> (f64, Vec<f64>) {
    let k = support.len() as f64;
    let anchor = g[support[0]];
    let offset = support.iter().map(|&i| g[i] - anchor).sum::<f64>() / k;
    let tau = anchor + (offset - slack / k);
    let mut probs = vec![0.0; g.len()];
    for &i in support {
        probs[i] = (1.0 / k + ((g[i] - anchor) - offset) / slack).max(0.0);
    }
    (tau, probs)
}
