use polydepth::polytransform::{
    curvature_normalized, eval_derivative, eval_poly, horner, inflection_points, sample_curve, slope_at, value_at,
    CurvatureChange,
};
use polydepth::{DepthKind, DepthMap, PolyCoefficients};
use proptest::prelude::*;

/// Straight power sum with explicit `powi`.
fn naive(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().enumerate().map(|(i, c)| c * u.powi(i as i32)).sum()
}

/// Magnitude of the largest term sum, the scale rounding error is measured against.
fn term_scale(coeffs: &[f64], u: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| (c * u.powi(i as i32)).abs())
        .sum::<f64>()
}

fn coeff_vec(max_degree: usize) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_degree).prop_flat_map(|n| prop::collection::vec(-10.0f64..10.0, n + 1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn horner_matches_power_sum(c in prop::collection::vec(-10.0f64..10.0, 9), u in 0.0f64..=1.0) {
        let h = horner(&c, u);
        let n = naive(&c, u);
        prop_assert!((h - n).abs() <= 1e-12 * term_scale(&c, u).max(f64::MIN_POSITIVE), "{h} vs {n}");
    }

    #[test]
    fn slope_matches_central_difference(c in coeff_vec(8), z_max in 0.5f64..100.0, t in 0.01f64..0.99) {
        let p = PolyCoefficients::new(c.clone(), z_max).unwrap();
        let z = t * z_max;
        let h = 1e-6 * z_max;
        let fd = (value_at(&p, z + h) - value_at(&p, z - h)) / (2.0 * h);
        let an = slope_at(&p, z);
        // Rounding in the difference quotient scales with |f|/h.
        let scale = an.abs().max(term_scale(&c, t) / z_max);
        prop_assert!((an - fd).abs() <= 1e-6 * scale, "analytic {an}, fd {fd}");
    }

    #[test]
    fn inflections_are_roots_of_the_curvature(c in coeff_vec(10), z_max in 0.5f64..100.0) {
        let p = PolyCoefficients::new(c.clone(), z_max).unwrap();
        let set = inflection_points(&p);
        prop_assert!(set.len() <= c.len().saturating_sub(3), "{} inflections for degree {}", set.len(), c.len() - 1);
        let mut last = 0.0;
        for q in &set.points {
            prop_assert!(q.z > last && q.z <= z_max);
            last = q.z;
            let f2 = curvature_normalized(&c, q.z / z_max);
            prop_assert!(f2.abs() < 1e-8, "f''({}) = {f2}", q.z);
        }
    }
}

#[test]
fn cubic_inflection_location_and_direction() {
    // u³ - 1.5u²: f'' = 6u - 3, root at u = 0.5 going negative to positive.
    let p = PolyCoefficients::new(vec![0.0, 0.0, -1.5, 1.0], 4.0).unwrap();
    let set = inflection_points(&p);
    assert_eq!(set.len(), 1);
    assert!((set.points[0].z - 2.0).abs() < 1e-9);
    assert_eq!(set.points[0].change, CurvatureChange::ConcaveToConvex);
}

#[test]
fn low_degrees_have_no_inflections() {
    for c in [vec![1.0, 2.0], vec![0.0, 1.0, 5.0]] {
        assert!(inflection_points(&PolyCoefficients::new(c, 1.0).unwrap()).is_empty());
    }
}

#[test]
fn identity_has_unit_slope_everywhere() {
    for z_max in [1.0, 80.0] {
        let p = PolyCoefficients::identity(8, z_max).unwrap();
        for s in sample_curve(&p, 512) {
            assert!((s.slope - 1.0).abs() < 1e-12);
            assert!((s.depth - s.z).abs() < 1e-12 * z_max);
        }
    }
}

#[test]
fn evaluation_clamps_negative_depths() {
    let z = DepthMap::new(1, 3, vec![0.0, 0.5, 1.0], DepthKind::Scaleless).unwrap();
    let p = PolyCoefficients::new(vec![-1.0, 4.0], 1.0).unwrap();
    let e = eval_poly(&p, &z).unwrap();
    assert_eq!(e.depth.values(), &[0.0, 1.0, 3.0]);
    assert_eq!(e.clamped, 1);
    // Slopes are reported unclamped.
    assert_eq!(eval_derivative(&p, &z).unwrap().values, vec![4.0; 3]);
}

#[test]
fn curve_has_512_points_spanning_the_range() {
    let p = PolyCoefficients::new(vec![1.0, 2.0, 3.0], 2.0).unwrap();
    let s = sample_curve(&p, 512);
    assert_eq!(s.len(), 512);
    assert_eq!(s[0].z, 0.0);
    assert_eq!(s[511].z, 2.0);
    assert_eq!(s[511].depth, 6.0);
}
