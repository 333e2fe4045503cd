mod common;

use common::{l2, max_abs_diff, rng, sv};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use sparsegen::mappings::{
    self, mirror_point, sparsecone, sparsegen, sparsegen_lin, sparsehourglass, sparsemax,
};
use sparsegen::simplex::{project_to_simplex, project_to_simplex_pivot, threshold_and_support};
use sparsegen::{HourglassParams, MappingSpec, ScoreVector, Transform, TransformKind};

fn scores(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 1..=max_len)
}

fn on_simplex() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 1..=8).prop_filter_map("zero mass", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-3).then(|| v.iter().map(|x| x / s).collect())
    })
}

fn hg(q: f64) -> HourglassParams {
    HourglassParams::new(q).unwrap()
}

fn all_specs() -> Vec<MappingSpec> {
    vec![
        MappingSpec::Softmax { temperature: 1.0 },
        MappingSpec::Softmax { temperature: 0.3 },
        MappingSpec::SphericalSoftmax,
        MappingSpec::SumNormalization,
        MappingSpec::Hardmax,
        MappingSpec::Sparsemax,
        MappingSpec::SparsegenLin { lambda: -1.5 },
        MappingSpec::SparsegenLin { lambda: 0.7 },
        MappingSpec::Sparsegen(TransformKind::new(Transform::Exponential, 0.3).unwrap()),
        MappingSpec::Sparsegen(TransformKind::new(Transform::Square, -0.5).unwrap()),
        MappingSpec::Sparsegen(TransformKind::new(Transform::Logarithm, 0.2).unwrap()),
        MappingSpec::Sparsecone(hg(1.0)),
        MappingSpec::Sparsehourglass(hg(0.5)),
        MappingSpec::SumNormalizationPp,
    ]
}

/// Mappings whose domain is smaller than all of R^K.
fn restricted(spec: &MappingSpec) -> bool {
    matches!(
        spec,
        MappingSpec::SphericalSoftmax
            | MappingSpec::SumNormalization
            | MappingSpec::Sparsecone(_)
            | MappingSpec::SumNormalizationPp
    ) || matches!(spec, MappingSpec::Sparsegen(k) if k.transform() == Transform::Logarithm)
}

fn monotone_specs() -> Vec<MappingSpec> {
    vec![
        MappingSpec::Softmax { temperature: 1.0 },
        MappingSpec::Sparsemax,
        MappingSpec::SparsegenLin { lambda: 0.4 },
        MappingSpec::SparsegenLin { lambda: -3.0 },
        MappingSpec::Sparsegen(TransformKind::new(Transform::Exponential, 0.5).unwrap()),
        MappingSpec::Sparsehourglass(hg(0.1)),
        MappingSpec::Sparsehourglass(hg(10.0)),
        MappingSpec::SumNormalizationPp,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn outputs_are_distributions(z in scores(8)) {
        let z = sv(&z);
        for spec in all_specs() {
            match spec.apply(&z) {
                Ok(p) => {
                    prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9, "{spec:?}");
                    prop_assert!(p.iter().all(|v| *v >= 0.0), "{spec:?}");
                }
                Err(e) => prop_assert!(e.is_domain() && restricted(&spec), "{spec:?}: {e}"),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn ordering_is_preserved(z in scores(8)) {
        let zv = sv(&z);
        for spec in monotone_specs() {
            let Ok(p) = spec.apply(&zv) else { continue };
            for i in 0..z.len() {
                for j in 0..z.len() {
                    if z[i] >= z[j] {
                        prop_assert!(p[i] >= p[j] - 1e-15, "{spec:?} z={z:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn permutation_equivariance(z in scores(8), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..z.len()).collect();
        perm.shuffle(&mut rng(seed));
        let permuted: Vec<f64> = perm.iter().map(|&i| z[i]).collect();
        for spec in all_specs() {
            let (Ok(p), Ok(pp)) = (spec.apply(&sv(&z)), spec.apply(&sv(&permuted))) else {
                continue;
            };
            let expected: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
            if matches!(spec, MappingSpec::Hardmax) {
                prop_assert_eq!(pp.probs(), &expected[..]);
            } else {
                prop_assert!(max_abs_diff(&pp, &expected) <= 1e-12, "{spec:?}");
            }
        }
    }

    #[test]
    fn translation_invariance(z in scores(8), c in -10.0..10.0f64) {
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        for spec in [
            MappingSpec::Sparsemax,
            MappingSpec::SparsegenLin { lambda: 0.5 },
            MappingSpec::SparsegenLin { lambda: -2.0 },
            MappingSpec::Softmax { temperature: 1.0 },
        ] {
            let a = spec.apply(&sv(&z)).unwrap();
            let b = spec.apply(&sv(&shifted)).unwrap();
            prop_assert!(max_abs_diff(&a, &b) <= 1e-9, "{spec:?}");
        }
        let big = MappingSpec::Sparsehourglass(hg(1e9));
        let a = big.apply(&sv(&z)).unwrap();
        let b = big.apply(&sv(&shifted)).unwrap();
        prop_assert!(max_abs_diff(&a, &b) <= 1e-5);
    }

    #[test]
    fn scale_invariance(z in scores(8), c in 0.01..100.0f64) {
        let scaled: Vec<f64> = z.iter().map(|v| v * c).collect();
        let nonneg: Vec<f64> = z.iter().map(|v| v.abs()).collect();
        let nonneg_scaled: Vec<f64> = nonneg.iter().map(|v| v * c).collect();
        let cases = [
            (MappingSpec::SphericalSoftmax, &z, &scaled),
            (MappingSpec::SumNormalizationPp, &z, &scaled),
            (MappingSpec::SumNormalization, &nonneg, &nonneg_scaled),
        ];
        for (spec, a, b) in cases {
            let (Ok(pa), Ok(pb)) = (spec.apply(&sv(a)), spec.apply(&sv(b))) else { continue };
            prop_assert!(max_abs_diff(&pa, &pb) <= 1e-9, "{spec:?}");
        }
    }

    #[test]
    fn idempotent_on_simplex(p in on_simplex(), q in 0.001..1000.0f64) {
        let z = sv(&p);
        prop_assert!(max_abs_diff(&sparsemax(&z), &p) <= 1e-12);
        prop_assert!(max_abs_diff(&sparsegen_lin(&z, 0.0).unwrap(), &p) <= 1e-12);
        prop_assert!(max_abs_diff(&sparsehourglass(&z, &hg(q)).unwrap(), &p) <= 1e-12);
        prop_assert!(max_abs_diff(&mappings::sum_normalization(&z).unwrap(), &p) <= 1e-12);
    }

    #[test]
    fn scaled_sparsemax_identity(z in scores(8), lambda in -3.0..0.95f64) {
        let positive: Vec<f64> = z.iter().map(|v| v.exp()).collect();
        for transform in [
            Transform::Identity,
            Transform::Exponential,
            Transform::Square,
            Transform::Logarithm,
        ] {
            let input = if transform == Transform::Logarithm { &positive } else { &z };
            let kind = TransformKind::new(transform, lambda).unwrap();
            let direct = sparsegen(&sv(input), &kind).unwrap();
            let g = transform.apply(input).unwrap();
            let scaled: Vec<f64> = g.iter().map(|v| v / (1.0 - lambda)).collect();
            let via = sparsemax(&sv(&scaled));
            prop_assert!(max_abs_diff(&direct, &via) <= 1e-12, "{transform:?}");
        }
    }

    #[test]
    fn lipschitz_bounds(
        z in prop::collection::vec(-5.0..5.0f64, 2..=8),
        dz in prop::collection::vec(-1.0..1.0f64, 8),
        lambda in -3.0..0.95f64,
        q in 0.01..100.0f64,
    ) {
        let z2: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + b).collect();
        let dist = l2(&z, &z2);
        let k = z.len() as f64;
        let (a, b) = (sv(&z), sv(&z2));
        prop_assert!(l2(&sparsemax(&a), &sparsemax(&b)) <= dist + 1e-12);
        let lin = l2(&sparsegen_lin(&a, lambda).unwrap(), &sparsegen_lin(&b, lambda).unwrap());
        prop_assert!(lin <= dist / (1.0 - lambda) + 1e-12);
        let params = hg(q);
        let h = l2(&sparsehourglass(&a, &params).unwrap(), &sparsehourglass(&b, &params).unwrap());
        prop_assert!(h <= (1.0 + 1.0 / (k * q)) * dist + 1e-12);
    }

    #[test]
    fn cone_and_hourglass_agree_on_positive_half_space(z in scores(8), q in 0.01..100.0f64) {
        let s: f64 = z.iter().sum();
        let z = if s >= 0.0 { z } else { z.iter().map(|v| -v).collect() };
        let params = hg(q);
        let cone = sparsecone(&sv(&z), &params).unwrap();
        let glass = sparsehourglass(&sv(&z), &params).unwrap();
        prop_assert_eq!(cone.probs(), glass.probs());
    }

    #[test]
    fn hourglass_uses_mirror_point_below_zero_sum(z in scores(8), q in 0.01..100.0f64) {
        let s: f64 = z.iter().sum();
        prop_assume!(s.abs() > 1e-9);
        let z = if s < 0.0 { z } else { z.iter().map(|v| -v).collect() };
        let params = hg(q);
        let glass = sparsehourglass(&sv(&z), &params).unwrap();
        let mirrored = sparsecone(&mirror_point(&sv(&z)), &params).unwrap();
        prop_assert!(max_abs_diff(&glass, &mirrored) <= 1e-12);
    }

    #[test]
    fn lambda_limits(
        z in prop::collection::vec(-5.0..5.0f64, 2..=8),
        bounded in prop::collection::vec(-0.5..0.5f64, 2..=8),
    ) {
        let zv = sv(&z);
        let near_one = sparsegen_lin(&zv, 1.0 - 1e-9).unwrap();
        if zv.argmax_set().len() == 1 {
            let hard = mappings::hardmax(&zv);
            prop_assert!(max_abs_diff(&near_one, &hard) <= 1e-5);
        }
        let uniform = vec![1.0 / bounded.len() as f64; bounded.len()];
        let far = sparsegen_lin(&sv(&bounded), -1e6).unwrap();
        prop_assert!(max_abs_diff(&far, &uniform) <= 1e-6);
    }

    #[test]
    fn support_shrinks_as_lambda_grows(z in scores(10), l1 in -5.0..0.99f64, l2_ in -5.0..0.99f64) {
        let (lo, hi) = if l1 <= l2_ { (l1, l2_) } else { (l2_, l1) };
        let zv = sv(&z);
        let s_lo = threshold_and_support(&zv, lo).unwrap().support_size();
        let s_hi = threshold_and_support(&zv, hi).unwrap().support_size();
        prop_assert!(s_hi <= s_lo);
    }

    #[test]
    fn pivot_agrees_with_sort(z in scores(64), seed in any::<u64>()) {
        let zv = sv(&z);
        let a = project_to_simplex(&zv);
        let b = project_to_simplex_pivot(&zv, seed);
        prop_assert!(max_abs_diff(&a, &b) <= 1e-12);
    }
}

/// The published constant `1 + 1/(Kq)` is not a true global bound: next to
/// the zero-sum hyperplane the Jacobian of the rescaled input is not normal,
/// and its operator norm exceeds the largest eigenvalue.
#[test]
fn hourglass_local_constant_exceeds_published_bound_near_zero_sum() {
    let params = hg(1.0);
    let z = [0.3, -0.3 + 1e-7];
    let bound = 1.0 + 1.0 / 2.0;
    let base = sparsehourglass(&ScoreVector::new(z.to_vec()).unwrap(), &params).unwrap();
    let eps = 1e-8;
    let mut worst: f64 = 0.0;
    for step in 0..3600 {
        let theta = step as f64 * std::f64::consts::PI / 1800.0;
        let d = [theta.cos(), theta.sin()];
        if d[0] + d[1] < 0.0 {
            continue;
        }
        let moved = [z[0] + eps * d[0], z[1] + eps * d[1]];
        let p = sparsehourglass(&ScoreVector::new(moved.to_vec()).unwrap(), &params).unwrap();
        worst = worst.max(l2(&p, &base) / eps);
    }
    assert!(worst > bound + 0.05, "worst ratio {worst}");
    assert!(worst < 1.57, "worst ratio {worst}");
}
