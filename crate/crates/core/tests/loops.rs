//! Holonomy of small loops: the Berry phase of an infinitesimal square
//! against `J̃`, and vanishing phase for quasi-classical models.

use qestim::geometry::{info_geometry, rpf_transport, square_loop};
use qestim::models::{tangent_frame, zoo, ParametricModel};

/// Phase of the square of side `eps` centred at `theta`, divided by `eps²`.
fn phase_ratio(model: &ParametricModel, theta: &[f64], eps: f64) -> f64 {
    let corner: Vec<f64> = theta.iter().map(|t| t - eps / 2.0).collect();
    let r = rpf_transport(model, &square_loop(&corner, 0, 1, eps), 40).unwrap();
    assert!(r.closure_error < 1e-9, "closure {}", r.closure_error);
    r.phase.unwrap() / (eps * eps)
}

/// Richardson limit of `phase/eps²` and the observed order of its error.
fn extrapolate(model: &ParametricModel, theta: &[f64], eps: f64) -> (f64, f64) {
    let c = [phase_ratio(model, theta, eps), phase_ratio(model, theta, eps / 2.0), phase_ratio(model, theta, eps / 4.0)];
    // centred loops have an even error expansion
    let limit = (4.0 * c[2] - c[1]) / 3.0;
    let order = ((c[0] - c[1]) / (c[1] - c[2])).abs().log2();
    (limit, order)
}

fn jtilde12(model: &ParametricModel, theta: &[f64]) -> f64 {
    info_geometry(&tangent_frame(model, theta).unwrap()).unwrap().jtilde[(0, 1)]
}

#[test]
fn loop_phase_is_minus_half_jtilde() {
    let cases: [(f64, f64, [f64; 2]); 4] = [(0.5, 0.5, [1.0, 0.4]), (1.0, 1.0, [0.7, -0.3]), (1.0, 0.0, [1.2, 0.1]), (1.5, 0.5, [2.0, 1.1])];
    for (s, m, theta) in cases {
        let model = zoo::spin_coherent(s, m, 1.0).unwrap();
        let jt = jtilde12(&model, &theta);
        let (limit, order) = extrapolate(&model, &theta, 0.08);
        if jt.abs() < 1e-12 {
            assert!(limit.abs() < 1e-8, "(s,m)=({s},{m}): phase {limit} with zero J̃");
            continue;
        }
        let kappa = limit / jt;
        assert!((kappa + 0.5).abs() < 1e-6, "(s,m)=({s},{m}): constant {kappa}");
        assert!(order >= 1.9, "(s,m)=({s},{m}): order {order}");
    }
}

#[test]
fn loop_phase_for_the_oscillator_shift() {
    let model = zoo::pm_shift_fock(1, 64, 1.0).unwrap();
    let theta = [0.2, -0.1];
    let jt = jtilde12(&model, &theta);
    let (limit, _) = extrapolate(&model, &theta, 0.1);
    assert!((limit / jt + 0.5).abs() < 1e-6, "{limit} vs {jt}");
}

#[test]
fn quasi_classical_loops_have_no_phase() {
    let model = zoo::real_amplitude(2).unwrap();
    for eps in [0.2, 0.05, 0.01] {
        let r = rpf_transport(&model, &square_loop(&[0.6, 0.9], 0, 1, eps), 30).unwrap();
        assert!(r.phase.unwrap().abs() <= 1e-8, "eps {eps}: {}", r.phase.unwrap());
    }
}
