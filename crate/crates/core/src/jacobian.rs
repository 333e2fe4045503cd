//! Analytic Jacobians `J[i][j] = d rho_i / d z_j`, Jacobian-vector products
//! and a central finite-difference oracle.
//!
//! Every sparse mapping here is `sparsemax(w(z))` for some inner map `w`, so
//! its Jacobian is `J_sparsemax(w) * J_w(z)` with
//! `J_sparsemax = Diag(s) - s s^T / |S|` and `s` the support indicator.
//! Two shapes of `J_w` occur: diagonal (sparsegen transforms scaled by
//! `1 / (1 - lambda)`) and `alpha I - c z 1^T` (sparsecone, sparsehourglass).
//!
//! At support-change boundaries the derivative does not exist; the matrix for
//! the support found by the closed form is returned and
//! [`JacobianMatrix::on_boundary`] is set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::mappings::{self, HourglassParams, MappingSpec, Transform, TransformKind};
use crate::simplex::{threshold_sorted, ScoreVector};
use crate::{Error, Result};

/// Relative tolerance deciding that a score sits on the support boundary.
const BOUNDARY_TOL: f64 = 1e-12;

/// Dense `K x K` Jacobian, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    dim: usize,
    entries: Vec<f64>,
    on_boundary: bool,
}

impl JacobianMatrix {
    fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
            on_boundary: false,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::LengthMismatch(bad.len(), dim));
        }
        Ok(Self {
            dim,
            entries: rows.concat(),
            on_boundary: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    fn set(&mut self, row: usize, col: usize, value: f64) {
        self.entries[row * self.dim + col] = value;
    }

    /// True when the point sits on a support-change boundary (or on the
    /// `sum z = 0` kink of sparsehourglass) and the matrix is a one-sided
    /// choice rather than a derivative.
    pub fn on_boundary(&self) -> bool {
        self.on_boundary
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self.get(i, j)).sum())
            .collect()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        self.entries
            .chunks(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest elementwise absolute difference.
    pub fn max_abs_diff(&self, other: &JacobianMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Inner map `w(z)` feeding sparsemax, with its Jacobian.
enum InnerJacobian {
    /// `J_w = Diag(diag)`.
    Diagonal(Vec<f64>),
    /// `J_w = alpha I - coef * z 1^T`.
    RankOne { alpha: f64, coef: f64, z: Vec<f64> },
}

struct Linearization {
    w: Vec<f64>,
    inner: InnerJacobian,
    /// Kink in `w` itself (the `|sum z|` of sparsehourglass at zero).
    kink: bool,
}

fn linearize(spec: &MappingSpec, z: &ScoreVector) -> Result<Option<Linearization>> {
    let lin = match *spec {
        MappingSpec::Sparsemax => sparsegen_linearization(z, &TransformKind::identity(0.0)?)?,
        MappingSpec::SparsegenLin { lambda } => {
            sparsegen_linearization(z, &TransformKind::identity(lambda)?)?
        }
        MappingSpec::Sparsegen(kind) => sparsegen_linearization(z, &kind)?,
        MappingSpec::Sparsecone(params) => {
            let alpha = params.alpha(z)?;
            let kq = z.len() as f64 * params.q();
            let coef = alpha / (z.sum() + kq);
            rank_one(z, alpha, coef, false)?
        }
        MappingSpec::Sparsehourglass(params) => hourglass_linearization(z, &params)?,
        MappingSpec::SumNormalizationPp => hourglass_linearization(z, &HourglassParams::new(0.0)?)?,
        MappingSpec::Softmax { .. } | MappingSpec::Hardmax => return Ok(None),
        MappingSpec::SphericalSoftmax => return Err(Error::NotDifferentiable("spherical-softmax")),
        MappingSpec::SumNormalization => return Err(Error::NotDifferentiable("sum-normalization")),
    };
    Ok(Some(lin))
}

fn sparsegen_linearization(z: &ScoreVector, kind: &TransformKind) -> Result<Linearization> {
    let gamma = kind.gamma();
    let g = kind.transform().apply(z)?;
    let w: Vec<f64> = g.iter().map(|v| v * gamma).collect();
    let diag = z
        .iter()
        .map(|&v| kind.transform().derivative(v) * gamma)
        .collect();
    Ok(Linearization {
        w,
        inner: InnerJacobian::Diagonal(diag),
        kink: false,
    })
}

fn hourglass_linearization(z: &ScoreVector, params: &HourglassParams) -> Result<Linearization> {
    let alpha = params.alpha_hat(z)?;
    let sum = z.sum();
    let kq = z.len() as f64 * params.q();
    // sgn(0) := +1
    let sign = if sum < 0.0 { -1.0 } else { 1.0 };
    let coef = alpha * sign / (sum.abs() + kq);
    rank_one(z, alpha, coef, sum == 0.0)
}

fn rank_one(z: &ScoreVector, alpha: f64, coef: f64, kink: bool) -> Result<Linearization> {
    let w: Vec<f64> = z.iter().map(|v| alpha * v).collect();
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("scaled scores overflowed"));
    }
    Ok(Linearization {
        w,
        inner: InnerJacobian::RankOne {
            alpha,
            coef,
            z: z.to_vec(),
        },
        kink,
    })
}

/// Support indicator of `sparsemax(w)` and whether any score is on the
/// boundary `w_i == tau`.
fn support_of(w: &[f64]) -> (Vec<bool>, usize, bool) {
    let t = threshold_sorted(w, 0.0);
    let mut s = vec![false; w.len()];
    for &i in &t.support {
        s[i] = true;
    }
    let boundary = w
        .iter()
        .any(|&v| (v - t.tau).abs() <= BOUNDARY_TOL * (1.0 + v.abs()));
    (s, t.support.len(), boundary)
}

/// `J_sparsemax(w) * d = s . d - mean_S(d) s`.
fn sparsemax_jvp(s: &[bool], size: usize, d: &[f64]) -> Vec<f64> {
    let mean = s
        .iter()
        .zip(d)
        .filter(|(on, _)| **on)
        .map(|(_, v)| v)
        .sum::<f64>()
        / size as f64;
    s.iter()
        .zip(d)
        .map(|(&on, &v)| if on { v - mean } else { 0.0 })
        .collect()
}

fn sparsemax_matrix(s: &[bool], size: usize) -> JacobianMatrix {
    let n = s.len();
    let mut jac = JacobianMatrix::zeros(n);
    let inv = 1.0 / size as f64;
    for i in (0..n).filter(|&i| s[i]) {
        for j in (0..n).filter(|&j| s[j]) {
            jac.set(i, j, if i == j { 1.0 - inv } else { -inv });
        }
    }
    jac
}

fn compose(lin: &Linearization) -> JacobianMatrix {
    let (s, size, boundary) = support_of(&lin.w);
    let sm = sparsemax_matrix(&s, size);
    let n = s.len();
    let mut jac = JacobianMatrix::zeros(n);
    match &lin.inner {
        InnerJacobian::Diagonal(diag) => {
            for i in 0..n {
                for (j, d) in diag.iter().enumerate() {
                    jac.set(i, j, sm.get(i, j) * d);
                }
            }
        }
        InnerJacobian::RankOne { alpha, coef, z } => {
            let sz = sm.matvec(z);
            for (i, szi) in sz.iter().enumerate() {
                for j in 0..n {
                    jac.set(i, j, alpha * sm.get(i, j) - coef * szi);
                }
            }
        }
    }
    jac.on_boundary = boundary || lin.kink;
    jac
}

/// `Diag(s) - s s^T / |S|` at `z`.
pub fn jacobian_sparsemax(z: &ScoreVector) -> JacobianMatrix {
    let lin = sparsegen_linearization(z, &TransformKind::identity(0.0).expect("0 < 1"))
        .expect("identity transform of finite scores is finite");
    compose(&lin)
}

/// `J_sparsemax(g(z) / (1 - lambda)) * J_g(z) / (1 - lambda)`.
pub fn jacobian_sparsegen(z: &ScoreVector, kind: &TransformKind) -> Result<JacobianMatrix> {
    Ok(compose(&sparsegen_linearization(z, kind)?))
}

/// `J_sparsemax(alpha_hat z) * (alpha_hat I - alpha_hat sgn(sum z) / (|sum z| + Kq) z 1^T)`.
pub fn jacobian_sparsehourglass(
    z: &ScoreVector,
    params: &HourglassParams,
) -> Result<JacobianMatrix> {
    Ok(compose(&hourglass_linearization(z, params)?))
}

fn softmax_jacobian(z: &ScoreVector, temperature: f64) -> Result<JacobianMatrix> {
    let p = mappings::softmax(z, temperature)?;
    let n = p.len();
    let mut jac = JacobianMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let diag = if i == j { p[i] } else { 0.0 };
            jac.set(i, j, (diag - p[i] * p[j]) / temperature);
        }
    }
    Ok(jac)
}

/// Analytic Jacobian of any differentiable mapping.
pub fn jacobian(spec: &MappingSpec, z: &ScoreVector) -> Result<JacobianMatrix> {
    match *spec {
        MappingSpec::Softmax { temperature } => softmax_jacobian(z, temperature),
        MappingSpec::Hardmax => {
            let mut jac = JacobianMatrix::zeros(z.len());
            jac.on_boundary = z.argmax_set().len() > 1;
            Ok(jac)
        }
        _ => {
            let lin = linearize(spec, z)?.expect("sparse mappings linearize");
            Ok(compose(&lin))
        }
    }
}

/// Jacobian-vector product `J(z) d` without forming `J`.
pub fn jvp(spec: &MappingSpec, z: &ScoreVector, direction: &ScoreVector) -> Result<ScoreVector> {
    if z.len() != direction.len() {
        return Err(Error::LengthMismatch(z.len(), direction.len()));
    }
    let out = match *spec {
        MappingSpec::Softmax { temperature } => {
            let p = mappings::softmax(z, temperature)?;
            let dot: f64 = p.iter().zip(direction.iter()).map(|(a, b)| a * b).sum();
            p.iter()
                .zip(direction.iter())
                .map(|(pi, di)| pi * (di - dot) / temperature)
                .collect()
        }
        MappingSpec::Hardmax => vec![0.0; z.len()],
        _ => {
            let lin = linearize(spec, z)?.expect("sparse mappings linearize");
            let inner: Vec<f64> = match &lin.inner {
                InnerJacobian::Diagonal(diag) => diag
                    .iter()
                    .zip(direction.iter())
                    .map(|(a, b)| a * b)
                    .collect(),
                InnerJacobian::RankOne { alpha, coef, z } => {
                    let total: f64 = direction.iter().sum();
                    direction
                        .iter()
                        .zip(z)
                        .map(|(d, zi)| alpha * d - coef * zi * total)
                        .collect()
                }
            };
            let (s, size, _) = support_of(&lin.w);
            sparsemax_jvp(&s, size, &inner)
        }
    };
    ScoreVector::new(out)
}

/// Central-difference Jacobian `(rho(z + h e_j) - rho(z - h e_j)) / 2h`.
pub fn finite_diff_jacobian(spec: &MappingSpec, z: &ScoreVector, h: f64) -> Result<JacobianMatrix> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidStep(h));
    }
    let n = z.len();
    let mut jac = JacobianMatrix::zeros(n);
    let mut shifted = z.to_vec();
    for j in 0..n {
        shifted[j] = z[j] + h;
        let plus = mappings::apply(spec, &ScoreVector::new(shifted.clone())?)?;
        shifted[j] = z[j] - h;
        let minus = mappings::apply(spec, &ScoreVector::new(shifted.clone())?)?;
        shifted[j] = z[j];
        for i in 0..n {
            jac.set(i, j, (plus[i] - minus[i]) / (2.0 * h));
        }
    }
    Ok(jac)
}

/// Whether central differences with step `h` stay on one smooth piece of the
/// mapping around `z`: every projected score is farther than `10 h` (scaled
/// by the inner map's gain) from the threshold, and the point is clear of
/// kinks and domain edges.
pub fn fd_safe(spec: &MappingSpec, z: &ScoreVector, h: f64) -> Result<bool> {
    let k = z.len() as f64;
    let sum = z.sum();
    match *spec {
        MappingSpec::Softmax { .. } => return Ok(true),
        MappingSpec::Hardmax => return Ok(z.argmax_set().len() == 1),
        MappingSpec::Sparsegen(kind) if kind.transform() == Transform::Logarithm => {
            if z.iter().any(|&v| v <= 10.0 * h) {
                return Ok(false);
            }
        }
        MappingSpec::Sparsecone(params) if sum + k * params.q() <= 10.0 * h * k => {
            return Ok(false)
        }
        MappingSpec::Sparsehourglass(_) | MappingSpec::SumNormalizationPp
            if sum.abs() <= 10.0 * h * k =>
        {
            return Ok(false)
        }
        _ => {}
    }
    let lin = linearize(spec, z)?.expect("sparse mappings linearize");
    let gain = match &lin.inner {
        InnerJacobian::Diagonal(diag) => diag.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        InnerJacobian::RankOne { alpha, coef, z } => {
            alpha + coef.abs() * k * z.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        }
    };
    let tau = threshold_sorted(&lin.w, 0.0).tau;
    let margin = lin
        .w
        .iter()
        .map(|v| (v - tau).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(margin > 10.0 * h * gain)
}

/// Outcome of a randomized analytic-vs-finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub target: String,
    /// Points compared.
    pub checked: usize,
    /// Sampled points rejected as too close to a boundary or domain edge.
    pub skipped: usize,
    pub max_deviation: f64,
    /// Largest `|column sum|` of the analytic Jacobians.
    pub max_column_sum: f64,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_deviation <= self.tolerance && self.max_column_sum <= 1e-9
    }
}

/// Draws a random point in the natural domain of `spec`, dimension 2..=8.
fn sample_point(spec: &MappingSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = rng.random_range(2..=8);
    let mut normal = |scale: f64| -> Vec<f64> {
        (0..k)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    match spec {
        MappingSpec::Sparsegen(kind) if kind.transform() == Transform::Logarithm => {
            normal(1.0).into_iter().map(f64::exp).collect()
        }
        MappingSpec::Sparsegen(kind) if kind.transform() == Transform::Exponential => normal(1.0),
        _ => normal(2.0),
    }
}

/// Compares the analytic Jacobian with central differences at `trials`
/// random points (points within `10 h` of a boundary are resampled).
pub fn gradcheck(
    spec: &MappingSpec,
    trials: usize,
    seed: u64,
    h: f64,
    tolerance: f64,
) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradcheckReport {
        target: spec.name().to_string(),
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
        let z = ScoreVector::new(sample_point(spec, &mut rng))?;
        match fd_safe(spec, &z, h) {
            Ok(true) => {}
            Ok(false) | Err(Error::Domain(_)) => {
                report.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        }
        let analytic = jacobian(spec, &z)?;
        let numeric = finite_diff_jacobian(spec, &z, h)?;
        report.max_deviation = report.max_deviation.max(analytic.max_abs_diff(&numeric));
        let col = analytic
            .column_sums()
            .into_iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        report.max_column_sum = report.max_column_sum.max(col);
        report.checked += 1;
    }
    Ok(report)
}
