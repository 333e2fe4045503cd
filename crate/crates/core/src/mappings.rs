//! Probability mapping functions from scores to the simplex.
//!
//! Dense classics (softmax, spherical softmax, sum-normalization), hardmax,
//! and the sparse family built on the regularized simplex projection:
//! sparsemax, sparsegen with a component-wise transform, sparsegen-lin,
//! sparsecone, sparsehourglass and sum-normalization++.

use serde::{Deserialize, Serialize};

use crate::simplex::{check_lambda, solve_sorted, ProbabilityVector, ScoreVector};
use crate::{Error, Result};

/// Component-wise transform `g` applied before the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Exponential,
    Square,
    /// Natural logarithm; defined for strictly positive scores only.
    Logarithm,
}

impl Transform {
    pub fn name(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Exponential => "exp",
            Transform::Square => "square",
            Transform::Logarithm => "log",
        }
    }

    pub fn apply(self, z: &[f64]) -> Result<Vec<f64>> {
        let g: Vec<f64> = match self {
            Transform::Identity => z.to_vec(),
            Transform::Exponential => z.iter().map(|v| v.exp()).collect(),
            Transform::Square => z.iter().map(|v| v * v).collect(),
            Transform::Logarithm => {
                if let Some(i) = z.iter().position(|&v| v <= 0.0) {
                    return Err(Error::domain(format!(
                        "logarithm transform requires strictly positive scores (z[{i}] = {})",
                        z[i]
                    )));
                }
                z.iter().map(|v| v.ln()).collect()
            }
        };
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "{} transform overflowed",
                self.name()
            )));
        }
        Ok(g)
    }

    /// `g'(z_i)`; the Jacobian of a component-wise transform is diagonal.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Exponential => z.exp(),
            Transform::Square => 2.0 * z,
            Transform::Logarithm => 1.0 / z,
        }
    }
}

/// A transform together with its regularization coefficient `lambda < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransformKind")]
pub struct TransformKind {
    transform: Transform,
    lambda: f64,
}

#[derive(Deserialize)]
struct RawTransformKind {
    transform: Transform,
    lambda: f64,
}

impl TryFrom<RawTransformKind> for TransformKind {
    type Error = Error;

    fn try_from(raw: RawTransformKind) -> Result<Self> {
        Self::new(raw.transform, raw.lambda)
    }
}

impl TransformKind {
    pub fn new(transform: Transform, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { transform, lambda })
    }

    pub fn identity(lambda: f64) -> Result<Self> {
        Self::new(Transform::Identity, lambda)
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Equivalent scaling `1 / (1 - lambda)` of the transformed scores.
    pub fn gamma(&self) -> f64 {
        1.0 / (1.0 - self.lambda)
    }
}

/// Anchor magnitude `q` of the point `(-q, ..., -q)` used by sparsecone and
/// sparsehourglass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHourglassParams")]
pub struct HourglassParams {
    q: f64,
}

#[derive(Deserialize)]
struct RawHourglassParams {
    q: f64,
}

impl TryFrom<RawHourglassParams> for HourglassParams {
    type Error = Error;

    fn try_from(raw: RawHourglassParams) -> Result<Self> {
        Self::new(raw.q)
    }
}

impl HourglassParams {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_finite() && q >= 0.0 {
            Ok(Self { q })
        } else {
            Err(Error::InvalidQ(q))
        }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Sparsecone scale `(1 + Kq) / (sum z + Kq)`; requires `sum z > -Kq`.
    pub fn alpha(&self, z: &[f64]) -> Result<f64> {
        let kq = z.len() as f64 * self.q;
        let denom = z.iter().sum::<f64>() + kq;
        if denom <= 0.0 {
            return Err(Error::domain(format!(
                "sparsecone requires sum(z) > -K*q (sum(z) + K*q = {denom})"
            )));
        }
        Ok((1.0 + kq) / denom)
    }

    /// Sparsehourglass scale `(1 + Kq) / (|sum z| + Kq)`.
    pub fn alpha_hat(&self, z: &[f64]) -> Result<f64> {
        let kq = z.len() as f64 * self.q;
        let denom = z.iter().sum::<f64>().abs() + kq;
        if denom == 0.0 {
            return Err(Error::domain(
                "sparsehourglass with q = 0 is undefined where sum(z) = 0",
            ));
        }
        Ok((1.0 + kq) / denom)
    }
}

/// Which mapping to apply, with its controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MappingSpec {
    Softmax { temperature: f64 },
    SphericalSoftmax,
    SumNormalization,
    Hardmax,
    Sparsemax,
    Sparsegen(TransformKind),
    SparsegenLin { lambda: f64 },
    Sparsecone(HourglassParams),
    Sparsehourglass(HourglassParams),
    SumNormalizationPp,
}

impl MappingSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MappingSpec::Softmax { .. } => "softmax",
            MappingSpec::SphericalSoftmax => "spherical-softmax",
            MappingSpec::SumNormalization => "sum-normalization",
            MappingSpec::Hardmax => "hardmax",
            MappingSpec::Sparsemax => "sparsemax",
            MappingSpec::Sparsegen(_) => "sparsegen",
            MappingSpec::SparsegenLin { .. } => "sparsegen-lin",
            MappingSpec::Sparsecone(_) => "sparsecone",
            MappingSpec::Sparsehourglass(_) => "sparsehourglass",
            MappingSpec::SumNormalizationPp => "sum-normalization-pp",
        }
    }

    pub fn apply(&self, z: &ScoreVector) -> Result<ProbabilityVector> {
        apply(self, z)
    }
}

/// Dispatches to the mapping named by `spec`.
pub fn apply(spec: &MappingSpec, z: &ScoreVector) -> Result<ProbabilityVector> {
    match *spec {
        MappingSpec::Softmax { temperature } => softmax(z, temperature),
        MappingSpec::SphericalSoftmax => spherical_softmax(z),
        MappingSpec::SumNormalization => sum_normalization(z),
        MappingSpec::Hardmax => Ok(hardmax(z)),
        MappingSpec::Sparsemax => Ok(sparsemax(z)),
        MappingSpec::Sparsegen(kind) => sparsegen(z, &kind),
        MappingSpec::SparsegenLin { lambda } => sparsegen_lin(z, lambda),
        MappingSpec::Sparsecone(params) => sparsecone(z, &params),
        MappingSpec::Sparsehourglass(params) => sparsehourglass(z, &params),
        MappingSpec::SumNormalizationPp => sum_normalization_pp(z),
    }
}

pub fn softmax(z: &ScoreVector, temperature: f64) -> Result<ProbabilityVector> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidTemperature(temperature));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| ((v - max) / temperature).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(ProbabilityVector::from_probs(
        exps.into_iter().map(|e| e / total).collect(),
    ))
}

/// `z_i^2 / sum_j z_j^2`; undefined at the origin.
pub fn spherical_softmax(z: &ScoreVector) -> Result<ProbabilityVector> {
    let scale = z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::domain(
            "spherical softmax is undefined when sum(z_j^2) = 0",
        ));
    }
    let squares: Vec<f64> = z.iter().map(|v| (v / scale).powi(2)).collect();
    let total: f64 = squares.iter().sum();
    Ok(ProbabilityVector::from_probs(
        squares.into_iter().map(|s| s / total).collect(),
    ))
}

/// `z_i / sum_j z_j` for non-negative scores with positive total.
pub fn sum_normalization(z: &ScoreVector) -> Result<ProbabilityVector> {
    if let Some(i) = z.iter().position(|&v| v < 0.0) {
        return Err(Error::domain(format!(
            "sum-normalization requires non-negative scores (z[{i}] = {})",
            z[i]
        )));
    }
    let total = z.sum();
    if total <= 0.0 {
        return Err(Error::domain(
            "sum-normalization is undefined when sum(z) = 0",
        ));
    }
    Ok(ProbabilityVector::from_probs(
        z.iter().map(|v| v / total).collect(),
    ))
}

/// Uniform distribution over the maximal entries.
pub fn hardmax(z: &ScoreVector) -> ProbabilityVector {
    let winners = z.argmax_set();
    let mass = 1.0 / winners.len() as f64;
    let mut probs = vec![0.0; z.len()];
    for i in winners {
        probs[i] = mass;
    }
    ProbabilityVector::from_probs(probs)
}

pub fn sparsemax(z: &ScoreVector) -> ProbabilityVector {
    solve_sorted(z, 0.0)
}

/// `argmin_{p in simplex} ||p - g(z)||^2 - lambda ||p||^2`, solved in closed
/// form directly on `g(z)` and `lambda`.
pub fn sparsegen(z: &ScoreVector, kind: &TransformKind) -> Result<ProbabilityVector> {
    check_lambda(kind.lambda)?;
    let g = kind.transform.apply(z)?;
    Ok(solve_sorted(&g, kind.lambda))
}

/// Sparsegen with the identity transform.
pub fn sparsegen_lin(z: &ScoreVector, lambda: f64) -> Result<ProbabilityVector> {
    check_lambda(lambda)?;
    Ok(solve_sorted(z, lambda))
}

/// `sparsemax(alpha(z) z)`: projection toward the simplex along the line
/// through the anchor `(-q, ..., -q)`.
pub fn sparsecone(z: &ScoreVector, params: &HourglassParams) -> Result<ProbabilityVector> {
    let alpha = params.alpha(z)?;
    scaled_sparsemax(z, alpha)
}

/// Reflection with negated coordinate sum and preserved pairwise differences:
/// `m_i = z_i - 2 sum(z) / K`.
pub fn mirror_point(z: &ScoreVector) -> ScoreVector {
    let shift = 2.0 * z.sum() / z.len() as f64;
    ScoreVector::new(z.iter().map(|v| v - shift).collect())
        .expect("shifting finite scores by a finite amount stays finite")
}

/// `sparsemax(alpha_hat(z) z)` with `alpha_hat = (1 + Kq) / (|sum z| + Kq)`.
pub fn sparsehourglass(z: &ScoreVector, params: &HourglassParams) -> Result<ProbabilityVector> {
    let alpha = params.alpha_hat(z)?;
    scaled_sparsemax(z, alpha)
}

/// Sparsehourglass at `q = 0`: `sparsemax(z / |sum z|)`.
pub fn sum_normalization_pp(z: &ScoreVector) -> Result<ProbabilityVector> {
    sparsehourglass(z, &HourglassParams { q: 0.0 })
}

fn scaled_sparsemax(z: &[f64], alpha: f64) -> Result<ProbabilityVector> {
    let scaled: Vec<f64> = z.iter().map(|v| alpha * v).collect();
    if scaled.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("scaled scores overflowed"));
    }
    Ok(solve_sorted(&scaled, 0.0))
}
