//! Convex multilabel losses on raw scores `z` against a label distribution
//! `eta = y / |y|_1`, each paired with the mapping whose behavior it induces.
//!
//! | loss                | paired mapping       |
//! |---------------------|----------------------|
//! | sparsegen-lin hinge | sparsegen-lin        |
//! | sparsemax hinge     | sparsemax            |
//! | sparsehg hinge      | sparsehourglass      |
//! | sparsemax huber     | sparsemax            |
//! | softmax log (KL)    | softmax              |
//!
//! The hinge losses are zero exactly when the paired mapping reproduces
//! `eta`: on-labels share one score, and each on-label beats each off-label
//! by the margin the projection needs to zero it out.
//!
//! On-on terms run over ordered pairs `(i, j)`, so each `|z_i - z_j|` is
//! counted twice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::jacobian::GradcheckReport;
use crate::mappings::{self, HourglassParams, MappingSpec};
use crate::simplex::{check_lambda, threshold_sorted, ScoreVector};
use crate::{Error, Result};

/// Uniform distribution over the on-labels of a binary label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    eta: Vec<f64>,
    on_set: Vec<usize>,
}

impl LabelDistribution {
    /// Builds `eta` from a 0/1 label vector with at least one label on.
    pub fn from_labels(y: &[u8]) -> Result<Self> {
        if let Some(i) = y.iter().position(|&v| v > 1) {
            return Err(Error::domain(format!(
                "label y[{i}] = {} is not 0 or 1",
                y[i]
            )));
        }
        let on: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
        Self::from_on_set(y.len(), &on)
    }

    pub fn from_on_set(num_labels: usize, on: &[usize]) -> Result<Self> {
        let mut on_set = on.to_vec();
        on_set.sort_unstable();
        on_set.dedup();
        if on_set.is_empty() {
            return Err(Error::domain("at least one label must be on"));
        }
        if let Some(&bad) = on_set.iter().find(|&&i| i >= num_labels) {
            return Err(Error::domain(format!(
                "label index {bad} out of range for {num_labels} labels"
            )));
        }
        let mass = 1.0 / on_set.len() as f64;
        let mut eta = vec![0.0; num_labels];
        for &i in &on_set {
            eta[i] = mass;
        }
        Ok(Self { eta, on_set })
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn on_set(&self) -> &[usize] {
        &self.on_set
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn is_on(&self, i: usize) -> bool {
        self.eta[i] > 0.0
    }

    /// Binary label vector.
    pub fn labels(&self) -> Vec<u8> {
        self.eta.iter().map(|&e| u8::from(e > 0.0)).collect()
    }

    fn off_set(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.eta.len()).filter(|&j| self.eta[j] == 0.0)
    }
}

/// Training loss of an activation-loss pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    SparsegenLinHinge { lambda: f64 },
    SparsehgHinge { q: f64 },
    SparsemaxHinge,
    SparsemaxHuber,
    SoftmaxLog,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::SparsegenLinHinge { .. } => "sparsegen-lin-hinge",
            LossKind::SparsehgHinge { .. } => "sparsehg-hinge",
            LossKind::SparsemaxHinge => "sparsemax-hinge",
            LossKind::SparsemaxHuber => "sparsemax-huber",
            LossKind::SoftmaxLog => "softmax-log",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::SparsegenLinHinge { lambda } => check_lambda(lambda),
            LossKind::SparsehgHinge { q } if !(q.is_finite() && q > 0.0) => Err(Error::InvalidQ(q)),
            _ => Ok(()),
        }
    }

    /// The mapping applied to scores at prediction time.
    pub fn activation(&self) -> Result<MappingSpec> {
        self.validate()?;
        Ok(match *self {
            LossKind::SparsegenLinHinge { lambda } => MappingSpec::SparsegenLin { lambda },
            LossKind::SparsemaxHinge => MappingSpec::SparsegenLin { lambda: 0.0 },
            LossKind::SparsehgHinge { q } => MappingSpec::Sparsehourglass(HourglassParams::new(q)?),
            LossKind::SparsemaxHuber => MappingSpec::Sparsemax,
            LossKind::SoftmaxLog => MappingSpec::Softmax { temperature: 1.0 },
        })
    }

    pub fn is_sparse(&self) -> bool {
        !matches!(self, LossKind::SoftmaxLog)
    }

    pub fn loss(&self, z: &ScoreVector, eta: &LabelDistribution) -> Result<f64> {
        match *self {
            LossKind::SparsegenLinHinge { lambda } => loss_sparsegen_lin_hinge(z, eta, lambda),
            LossKind::SparsehgHinge { q } => loss_sparsehg_hinge(z, eta, q),
            LossKind::SparsemaxHinge => loss_sparsegen_lin_hinge(z, eta, 0.0),
            LossKind::SparsemaxHuber => loss_sparsemax_huber(z, eta),
            LossKind::SoftmaxLog => loss_softmax_log(z, eta),
        }
    }

    pub fn subgradient(&self, z: &ScoreVector, eta: &LabelDistribution) -> Result<ScoreVector> {
        subgradient(self, z, eta)
    }
}

fn check_len(z: &ScoreVector, eta: &LabelDistribution) -> Result<()> {
    if z.len() == eta.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch(z.len(), eta.len()))
    }
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn loss_sparsegen_lin_hinge(
    z: &ScoreVector,
    eta: &LabelDistribution,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    check_len(z, eta)?;
    let gamma = 1.0 / (1.0 - lambda);
    let mut total = 0.0;
    for &i in eta.on_set() {
        for &j in eta.on_set() {
            total += gamma * (z[i] - z[j]).abs();
        }
        for j in eta.off_set() {
            total += (eta.eta[i] - gamma * (z[i] - z[j])).max(0.0);
        }
    }
    Ok(total)
}

/// `(|sum z| + Kq) / (1 + Kq)`, the reciprocal of the hourglass scale.
fn inverse_alpha_hat(z: &[f64], q: f64) -> f64 {
    let kq = z.len() as f64 * q;
    (z.iter().sum::<f64>().abs() + kq) / (1.0 + kq)
}

pub fn loss_sparsehg_hinge(z: &ScoreVector, eta: &LabelDistribution, q: f64) -> Result<f64> {
    LossKind::SparsehgHinge { q }.validate()?;
    check_len(z, eta)?;
    let inv_alpha = inverse_alpha_hat(z, q);
    let mut total = 0.0;
    for &i in eta.on_set() {
        for &j in eta.on_set() {
            total += (z[i] - z[j]).abs();
        }
        for j in eta.off_set() {
            total += (eta.eta[i] * inv_alpha - (z[i] - z[j])).max(0.0);
        }
    }
    Ok(total)
}

/// `-eta.z + 1/2 sum_{j in S(z)} (z_j^2 - tau(z)^2) + 1/2 |eta|^2`.
pub fn loss_sparsemax_huber(z: &ScoreVector, eta: &LabelDistribution) -> Result<f64> {
    check_len(z, eta)?;
    let t = threshold_sorted(z, 0.0);
    let linear: f64 = eta.eta.iter().zip(z.iter()).map(|(e, v)| e * v).sum();
    let quad: f64 = t.support.iter().map(|&j| z[j] * z[j] - t.tau * t.tau).sum();
    let norm: f64 = eta.eta.iter().map(|e| e * e).sum();
    // mathematically >= 0; clamp rounding residue at the zero-loss set
    Ok((-linear + 0.5 * quad + 0.5 * norm).max(0.0))
}

/// `KL(eta || softmax(z))` in nats.
pub fn loss_softmax_log(z: &ScoreVector, eta: &LabelDistribution) -> Result<f64> {
    check_len(z, eta)?;
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let kl: f64 = eta
        .on_set()
        .iter()
        .map(|&i| eta.eta[i] * (eta.eta[i].ln() - (z[i] - lse)))
        .sum();
    Ok(kl.max(0.0))
}

/// A subgradient of the loss at `z`. Uses `sign(0) := 0` for absolute values
/// and counts hinge terms only when strictly positive.
pub fn subgradient(
    kind: &LossKind,
    z: &ScoreVector,
    eta: &LabelDistribution,
) -> Result<ScoreVector> {
    kind.validate()?;
    check_len(z, eta)?;
    let n = z.len();
    let grad = match *kind {
        LossKind::SoftmaxLog => {
            let p = mappings::softmax(z, 1.0)?;
            p.iter().zip(eta.eta()).map(|(a, b)| a - b).collect()
        }
        LossKind::SparsemaxHuber => {
            let p = mappings::sparsemax(z);
            p.iter().zip(eta.eta()).map(|(a, b)| a - b).collect()
        }
        LossKind::SparsemaxHinge => lin_hinge_grad(z, eta, 1.0),
        LossKind::SparsegenLinHinge { lambda } => lin_hinge_grad(z, eta, 1.0 / (1.0 - lambda)),
        LossKind::SparsehgHinge { q } => {
            let kq = n as f64 * q;
            let inv_alpha = inverse_alpha_hat(z, q);
            let d_inv_alpha = sign0(z.sum()) / (1.0 + kq);
            let mut g = vec![0.0; n];
            let mut offset = 0.0;
            for &i in eta.on_set() {
                for &j in eta.on_set() {
                    let s = sign0(z[i] - z[j]);
                    g[i] += s;
                    g[j] -= s;
                }
                for j in eta.off_set() {
                    if eta.eta[i] * inv_alpha - (z[i] - z[j]) > 0.0 {
                        g[i] -= 1.0;
                        g[j] += 1.0;
                        offset += eta.eta[i] * d_inv_alpha;
                    }
                }
            }
            g.iter_mut().for_each(|v| *v += offset);
            g
        }
    };
    ScoreVector::new(grad)
}

fn lin_hinge_grad(z: &ScoreVector, eta: &LabelDistribution, gamma: f64) -> Vec<f64> {
    let mut g = vec![0.0; z.len()];
    for &i in eta.on_set() {
        for &j in eta.on_set() {
            let s = gamma * sign0(z[i] - z[j]);
            g[i] += s;
            g[j] -= s;
        }
        for j in eta.off_set() {
            if eta.eta[i] - gamma * (z[i] - z[j]) > 0.0 {
                g[i] -= gamma;
                g[j] += gamma;
            }
        }
    }
    g
}

/// Distance of `z` from the nearest kink of a piecewise-linear loss, measured
/// on the arguments of the `|.|` and `max{., 0}` terms. Smooth losses return
/// infinity.
pub fn kink_margin(kind: &LossKind, z: &ScoreVector, eta: &LabelDistribution) -> Result<f64> {
    kind.validate()?;
    check_len(z, eta)?;
    let (gamma, inv_alpha) = match *kind {
        LossKind::SoftmaxLog | LossKind::SparsemaxHuber => return Ok(f64::INFINITY),
        LossKind::SparsemaxHinge => (1.0, None),
        LossKind::SparsegenLinHinge { lambda } => (1.0 / (1.0 - lambda), None),
        LossKind::SparsehgHinge { q } => (1.0, Some(inverse_alpha_hat(z, q))),
    };
    let mut margin = match inv_alpha {
        Some(_) => z.sum().abs(),
        None => f64::INFINITY,
    };
    for &i in eta.on_set() {
        for &j in eta.on_set().iter().filter(|&&j| j != i) {
            margin = margin.min(gamma * (z[i] - z[j]).abs());
        }
        for j in eta.off_set() {
            let arg = match inv_alpha {
                Some(inv) => eta.eta[i] * inv - (z[i] - z[j]),
                None => eta.eta[i] - gamma * (z[i] - z[j]),
            };
            margin = margin.min(arg.abs());
        }
    }
    Ok(margin)
}

fn random_labels(rng: &mut ChaCha8Rng, k: usize) -> LabelDistribution {
    let count = rng.random_range(1..=k);
    let on = rand::seq::index::sample(rng, k, count).into_vec();
    LabelDistribution::from_on_set(k, &on).expect("sampled indices are in range")
}

/// Directional finite-difference check of [`subgradient`]:
/// `(L(z + h d) - L(z - h d)) / 2h` against `g . d` at random points away
/// from kinks.
pub fn gradcheck_loss(
    kind: &LossKind,
    trials: usize,
    seed: u64,
    h: f64,
    tolerance: f64,
) -> Result<GradcheckReport> {
    kind.validate()?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidStep(h));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradcheckReport {
        target: kind.name().to_string(),
        checked: 0,
        skipped: 0,
        max_deviation: 0.0,
        max_column_sum: 0.0,
        tolerance,
    };
    let max_attempts = trials.saturating_mul(50).max(100);
    let mut attempts = 0;
    while report.checked < trials && attempts < max_attempts {
        attempts += 1;
        let k = rng.random_range(2..=8);
        let eta = random_labels(&mut rng, k);
        let z: Vec<f64> = (0..k)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut d: Vec<f64> = (0..k)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.iter_mut().for_each(|v| *v /= norm);
        let z = ScoreVector::new(z)?;
        // a unit step moves every kink argument by at most 2 * gain * K
        if kink_margin(kind, &z, &eta)? <= 10.0 * h * 4.0 * k as f64 {
            report.skipped += 1;
            continue;
        }
        let shifted =
            |sign: f64| ScoreVector::new(z.iter().zip(&d).map(|(a, b)| a + sign * h * b).collect());
        let numeric =
            (kind.loss(&shifted(1.0)?, &eta)? - kind.loss(&shifted(-1.0)?, &eta)?) / (2.0 * h);
        let g = subgradient(kind, &z, &eta)?;
        let analytic: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        report.max_deviation = report.max_deviation.max((numeric - analytic).abs());
        report.checked += 1;
    }
    Ok(report)
}
