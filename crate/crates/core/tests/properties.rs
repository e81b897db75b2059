//! Property tests for the invariants of geometry, bounds, measurements and
//! the oracle.

use proptest::prelude::*;

use qestim::bounds::{boundary_curve, boundary_z, cr_two_param, two_param_js_value, Branch, WeightMatrix};
use qestim::geometry::info_geometry;
use qestim::io::{emit_json, parse_report, parse_weight, sig9, GeometryReport};
use qestim::models::{tangent_frame, zoo};
use qestim::selftest::{
    gauge_defect, hbar_scaling_defect, monotonicity_violation, oracle_deterministic, random_geometry2, random_pvm_defect,
    reparametrization_defect,
};
use qestim::{CVector, C64};

fn complex_vec(len: usize) -> impl Strategy<Value = CVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len)
        .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-2)
        .prop_map(|v| CVector::from_iterator(v.len(), v.into_iter().map(|(a, b)| C64::new(a, b))))
}

/// State and `m` tangents in dimension `d`.
fn pure_model_parts() -> impl Strategy<Value = (CVector, Vec<CVector>)> {
    (2usize..=4, 1usize..=3).prop_flat_map(|(m, extra)| {
        let d = m + extra;
        (complex_vec(d), prop::collection::vec(complex_vec(d), m))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gauge_invariance(
        spin in 0usize..4,
        t1 in 0.3f64..2.8,
        t2 in -3.0f64..3.0,
        c in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let (ts, tm) = [(1u32, 1i64), (2, 0), (2, 2), (3, -1)][spin];
        let d = gauge_defect(ts, tm, [t1, t2], c).unwrap();
        prop_assert!(d <= 1e-7, "defect {d}");
    }

    #[test]
    fn beta_at_most_one((phi, tangents) in pure_model_parts()) {
        let m = tangents.len();
        let model = match zoo::explicit_pure(phi, tangents, vec![0.0; m]) {
            Ok(model) => model,
            Err(_) => return Ok(()),
        };
        // nearly dependent tangents are rejected as redundant; that is fine
        if let Ok(frame) = tangent_frame(&model, &vec![0.0; m]) {
            if let Ok(geom) = info_geometry(&frame) {
                for b in &geom.beta_spectrum {
                    prop_assert!(*b <= 1.0 + 1e-9, "beta {b}");
                }
                prop_assert_eq!(2 * geom.beta_spectrum.len() + geom.zero_modes, m);
            }
        }
    }

    #[test]
    fn reparametrization_covariance(seed in any::<u64>()) {
        let d = reparametrization_defect(seed).unwrap();
        prop_assert!(d <= 1e-9, "relative change {d}");
    }

    #[test]
    fn cr_monotone_in_beta(seed in any::<u64>()) {
        prop_assert!(monotonicity_violation(seed).unwrap() <= 1e-12);
    }

    #[test]
    fn cr_monotone_pairwise(seed in any::<u64>(), b1 in 0.0f64..1.0, b2 in 0.0f64..1.0) {
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let (g_lo, w) = random_geometry2(seed, lo).unwrap();
        let (g_hi, _) = random_geometry2(seed, hi).unwrap();
        let a = cr_two_param(&g_lo, &w).unwrap().cr_value;
        let b = cr_two_param(&g_hi, &w).unwrap().cr_value;
        prop_assert!(a <= b * (1.0 + 1e-12), "{a} > {b}");
        prop_assert!(two_param_js_value(lo) <= two_param_js_value(hi));
    }

    #[test]
    fn pvm_complete_and_idempotent(seed in any::<u64>()) {
        let d = random_pvm_defect(seed).unwrap();
        prop_assert!(d <= 1e-9, "defect {d}");
    }

    #[test]
    fn boundary_points_lie_on_the_curve(beta in 0.0f64..0.999, samples in 3usize..60) {
        let pts = boundary_curve(beta, samples, None).unwrap();
        for p in pts.iter().filter(|p| p.branch == Branch::Curve) {
            prop_assert!(p.z >= 1.0 + p.x.abs() - 1e-12);
            let z = boundary_z(beta, p.x).unwrap();
            prop_assert!((z - p.z).abs() <= 1e-10 * z);
        }
    }

    #[test]
    fn text_format_keeps_nine_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = sig9(x).parse().unwrap();
        prop_assert!(((back - x) / x).abs() <= 5e-9, "{x} -> {}", sig9(x));
    }

    #[test]
    fn weight_files_round_trip(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
        let g = [[a * a + b * b + 0.1, a * c], [a * c, c * c + 0.1]];
        let text = format!("{:?} {:?}\n{:?} {:?}\n", g[0][0], g[0][1], g[1][0], g[1][1]);
        let w = parse_weight(&text).unwrap();
        let j = parse_weight(&serde_json::to_string(&g).unwrap()).unwrap();
        prop_assert_eq!(w.matrix(), j.matrix());
        prop_assert_eq!(w.matrix()[(0, 1)], a * c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn hbar_scaling(n in 0usize..3, hbar in 0.25f64..4.0) {
        let (cr, beta) = hbar_scaling_defect(n, hbar).unwrap();
        prop_assert!(cr <= 1e-8, "CR/hbar changed by {cr}");
        prop_assert!(beta <= 1e-10, "beta changed by {beta}");
    }

    #[test]
    fn oracle_determinism(seed in any::<u64>()) {
        prop_assert!(oracle_deterministic(seed).unwrap());
    }

    #[test]
    fn geometry_reports_round_trip(s in 0usize..3, t1 in 0.3f64..2.8, t2 in -3.0f64..3.0) {
        let (sp, m) = [(0.5, 0.5), (1.0, 0.0), (1.5, 0.5)][s];
        let model = zoo::spin_coherent(sp, m, 1.0).unwrap();
        let geom = info_geometry(&tangent_frame(&model, &[t1, t2]).unwrap()).unwrap();
        let r = GeometryReport::new(model.kind(), &[t1, t2], &geom).unwrap();
        let text = emit_json(&r).unwrap();
        prop_assert_eq!(parse_report::<GeometryReport>(&text).unwrap(), r);
    }

    #[test]
    fn weight_scaling_scales_bound(seed in any::<u64>(), beta in 0.0f64..1.0, c in 0.1f64..10.0) {
        let (geom, g) = random_geometry2(seed, beta).unwrap();
        let a = cr_two_param(&geom, &g).unwrap().cr_value;
        let b = cr_two_param(&geom, &WeightMatrix::new(g.matrix() * c).unwrap()).unwrap().cr_value;
        prop_assert!((b - c * a).abs() <= 1e-10 * c * a);
    }
}
