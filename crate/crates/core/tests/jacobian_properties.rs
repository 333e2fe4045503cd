mod common;

use common::sv;
use nalgebra::DMatrix;
use proptest::prelude::*;
use sparsegen::jacobian::{
    gradcheck, jacobian, jacobian_sparsegen, jacobian_sparsemax, jvp, JacobianMatrix,
};
use sparsegen::{HourglassParams, MappingSpec, Transform, TransformKind};

fn differentiable_specs() -> Vec<MappingSpec> {
    let hg = |q| HourglassParams::new(q).unwrap();
    let tk = |t, l| TransformKind::new(t, l).unwrap();
    vec![
        MappingSpec::Softmax { temperature: 1.0 },
        MappingSpec::Softmax { temperature: 0.5 },
        MappingSpec::Sparsemax,
        MappingSpec::SparsegenLin { lambda: 0.5 },
        MappingSpec::SparsegenLin { lambda: -2.0 },
        MappingSpec::Sparsegen(tk(Transform::Exponential, 0.2)),
        MappingSpec::Sparsegen(tk(Transform::Square, -0.5)),
        MappingSpec::Sparsegen(tk(Transform::Logarithm, 0.3)),
        MappingSpec::Sparsecone(hg(1.0)),
        MappingSpec::Sparsehourglass(hg(1.0)),
        MappingSpec::Sparsehourglass(hg(0.1)),
        MappingSpec::SumNormalizationPp,
    ]
}

#[test]
fn analytic_matches_central_differences() {
    for (seed, spec) in differentiable_specs().iter().enumerate() {
        let report = gradcheck(spec, 1000, seed as u64, 1e-6, 1e-4).unwrap();
        assert_eq!(report.checked, 1000, "{spec:?}");
        assert!(report.passed(), "{spec:?}: {report:?}");
    }
}

fn is_symmetric(j: &JacobianMatrix) -> bool {
    (0..j.dim()).all(|r| (0..j.dim()).all(|c| j.get(r, c) == j.get(c, r)))
}

/// Finite-difference Jacobian of `z -> alpha_hat(z) z`.
fn rescaling_jacobian(z: &[f64], params: &HourglassParams, h: f64) -> DMatrix<f64> {
    let k = z.len();
    let f = |v: &[f64]| -> Vec<f64> {
        let a = params.alpha_hat(v).unwrap();
        v.iter().map(|x| a * x).collect()
    };
    let mut m = DMatrix::zeros(k, k);
    for j in 0..k {
        let mut plus = z.to_vec();
        let mut minus = z.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let (fp, fm) = (f(&plus), f(&minus));
        for i in 0..k {
            m[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn columns_sum_to_zero(z in prop::collection::vec(-4.0..4.0f64, 1..=8)) {
        let zv = sv(&z);
        for spec in differentiable_specs() {
            let Ok(j) = jacobian(&spec, &zv) else { continue };
            for c in j.column_sums() {
                prop_assert!(c.abs() <= 1e-9, "{spec:?}");
            }
        }
    }

    #[test]
    fn identity_transform_jacobians_are_symmetric(
        z in prop::collection::vec(-4.0..4.0f64, 1..=8),
        lambda in -3.0..0.95f64,
    ) {
        let zv = sv(&z);
        prop_assert!(is_symmetric(&jacobian_sparsemax(&zv)));
        let j = jacobian_sparsegen(&zv, &TransformKind::identity(lambda).unwrap()).unwrap();
        prop_assert!(is_symmetric(&j));
    }

    #[test]
    fn jvp_matches_matrix(
        z in prop::collection::vec(-4.0..4.0f64, 2..=8),
        d in prop::collection::vec(-1.0..1.0f64, 8),
    ) {
        let zv = sv(&z);
        let dv = sv(&d[..z.len()]);
        for spec in differentiable_specs() {
            let Ok(j) = jacobian(&spec, &zv) else { continue };
            let product = jvp(&spec, &zv, &dv).unwrap();
            let dense = j.matvec(&dv);
            for (a, b) in product.iter().zip(&dense) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{spec:?}");
            }
        }
    }

    #[test]
    fn rescaling_eigenvalues(
        z in prop::collection::vec(-3.0..3.0f64, 2..=6),
        q in 0.05..20.0f64,
    ) {
        let s: f64 = z.iter().sum();
        prop_assume!(s.abs() > 1e-3);
        let k = z.len() as f64;
        let params = HourglassParams::new(q).unwrap();
        let alpha = params.alpha_hat(&z).unwrap();
        let low = alpha * (1.0 - s.abs() / (s.abs() + k * q));
        let m = rescaling_jacobian(&z, &params, 1e-6);
        let tol = 1e-6 * (1.0 + alpha);
        // alpha_hat has multiplicity K - 1: M - alpha_hat I has rank one
        let shifted = &m - DMatrix::identity(z.len(), z.len()) * alpha;
        let singular = shifted.svd(false, false).singular_values;
        prop_assert_eq!(singular.iter().filter(|v| **v > tol).count(), 1);
        // the trace fixes the remaining eigenvalue
        let last = m.trace() - (k - 1.0) * alpha;
        prop_assert!((last - low).abs() <= tol, "{last} vs {low}");
        prop_assert!(low > 0.0);
        prop_assert!(alpha.max(low) <= 1.0 + 1.0 / (k * q) + 1e-12);
    }
}
