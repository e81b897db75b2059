//! Oracle runs against closed forms, including searches in dilations larger
//! than `2m + 1`.

use qestim::bounds::{cr_two_param, WeightMatrix};
use qestim::geometry::info_geometry;
use qestim::models::{tangent_frame, zoo, ParametricModel};
use qestim::oracle::{oracle_frame, oracle_min_weighted_variance, verify_bound, SearchConfig};
use qestim::{RMatrix, Tolerances};

fn cfg(seed: u64, restarts: usize, dilate_dim: Option<usize>) -> SearchConfig {
    SearchConfig { restarts, local_steps: 1500, seed, dilate_dim, ..Default::default() }
}

fn closed(model: &ParametricModel, theta: &[f64], g: &WeightMatrix) -> f64 {
    cr_two_param(&info_geometry(&tangent_frame(model, theta).unwrap()).unwrap(), g).unwrap().cr_value
}

#[test]
fn quasi_classical_floor_is_reached() {
    let model = zoo::real_amplitude(2).unwrap();
    let theta = [0.6, 0.9];
    let g = WeightMatrix::identity(2);
    let r = oracle_min_weighted_variance(&model, &theta, &g, &cfg(4, 16, None)).unwrap();
    assert!(r.best_value >= r.floor * (1.0 - 1e-9));
    assert!(r.best_value <= r.floor * 1.005, "{} vs floor {}", r.best_value, r.floor);
}

#[test]
fn coherent_pair_with_unequal_weights() {
    let model = zoo::synthetic_blocks(&[1.0]).unwrap();
    let g = WeightMatrix::new(RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]))).unwrap();
    let cr = closed(&model, &[0.0, 0.0], &g);
    assert!((cr - 9.0).abs() < 1e-8, "closed form {cr}");
    let r = oracle_min_weighted_variance(&model, &[0.0, 0.0], &g, &cfg(2, 32, None)).unwrap();
    assert!(r.best_value >= 9.0 - 1e-9, "oracle {}", r.best_value);
    assert!(r.best_value <= 9.0 * 1.03, "oracle {}", r.best_value);
}

#[test]
fn partial_incompatibility_gap_is_small() {
    let model = zoo::synthetic_blocks(&[0.6]).unwrap();
    let g = WeightMatrix::identity(2);
    let frame = tangent_frame(&model, &[0.0, 0.0]).unwrap();
    let bound = cr_two_param(&info_geometry(&frame).unwrap(), &g).unwrap();
    let r = oracle_frame(&frame, &g, &cfg(8, 64, None), None, &Tolerances::default()).unwrap();
    let rep = verify_bound(&bound, &r).unwrap();
    assert!(rep.gap_above >= -1e-9);
    assert!(rep.relative_gap <= 0.03, "relative gap {}", rep.relative_gap);
}

#[test]
fn larger_dilations_never_beat_the_closed_form() {
    let cases: Vec<(ParametricModel, Vec<f64>, bool)> = vec![
        (zoo::synthetic_blocks(&[0.6]).unwrap(), vec![0.0, 0.0], false),
        (zoo::synthetic_blocks(&[1.0]).unwrap(), vec![0.0, 0.0], false),
        (zoo::spin_coherent(0.5, 0.5, 1.0).unwrap(), vec![1.0, 0.4], true),
    ];
    for (k, (model, theta, js_weight)) in cases.iter().enumerate() {
        let frame = tangent_frame(model, theta).unwrap();
        let geom = info_geometry(&frame).unwrap();
        let g = if *js_weight { WeightMatrix::new(geom.js.clone()).unwrap() } else { WeightMatrix::identity(2) };
        let cr = cr_two_param(&geom, &g).unwrap().cr_value;
        for dim in [5, 7, 9] {
            let r = oracle_frame(&frame, &g, &cfg(30 + k as u64, 12, Some(dim)), None, &Tolerances::default()).unwrap();
            assert_eq!(r.dim, dim);
            assert!(r.best_value >= cr - 1e-9, "case {k}, dim {dim}: {} below {cr}", r.best_value);
        }
    }
}
