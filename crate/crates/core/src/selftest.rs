//! Acceptance checks shared by the test suite and `qestim selftest`.
//!
//! Each check returns a [`CriterionOutcome`] with a one-line detail. The
//! property helpers at the bottom are the building blocks of check 10 and are
//! also driven by the proptest suites.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{boundary_z, boundary_z_at_zero, cr_coherent, cr_general_js, cr_two_param, two_param_js_value, WeightMatrix};
use crate::geometry::{geometry_from_matrices, info_geometry, max_sld_commutator, uhlmann_curvature, CURVATURE_STEP};
use crate::measurements::{classical_fisher, optimal_measurement_frame, outcome_distribution};
use crate::models::{tangent_frame, zoo, TangentMode};
use crate::operators::{outer, real_symmetric_map};
use crate::oracle::{oracle_frame, oracle_min_weighted_variance, verify_bound, warm_start_basis, SearchConfig};
use crate::simulate::{simulate_gqmle, time_energy_report, w_ratio_convergence, MeasurementPolicy, QmleConfig};
use crate::{CMatrix, CVector, QestimError, RMatrix, Result, Tolerances, C64};

/// Checks that are known not to pass as stated, with the reason.
pub const DOCUMENTED_DEVIATIONS: &[(u8, &str)] = &[(
    6,
    "the closed-form J^S of the squeezed family has |det J^S| = 16 sinh^2(2θ³)/ℏ², four times the stated constant",
)];

pub const EXPLORATORY: &[u8] = &[11];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub gating: bool,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CriterionOutcome {
    pub fn documented_deviation(&self) -> Option<&'static str> {
        DOCUMENTED_DEVIATIONS.iter().find(|(id, _)| *id == self.id).map(|(_, why)| *why)
    }

    pub fn line(&self) -> String {
        let status = match (self.passed, self.gating, self.documented_deviation().is_some()) {
            (true, _, _) => "PASS",
            (false, false, _) => "FAIL (exploratory)",
            (false, true, true) => "FAIL (documented deviation)",
            (false, true, false) => "FAIL",
        };
        format!(
            "criterion {:>2} {:<40} {status:<28} {:>8.2}s  {}",
            self.id, self.name, self.seconds, self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Trials for the exploratory qMLE check.
    pub qmle_trials: usize,
    pub qmle_samples: usize,
    pub include_exploratory: bool,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions { seed: 20_240_601, qmle_trials: 500, qmle_samples: 2000, include_exploratory: true }
    }
}

pub const CRITERIA: [(u8, &str, f64); 11] = [
    (1, "spin-coherent metric and beta", 5.0),
    (2, "two-parameter closed forms agree", 1.0),
    (3, "coherent cross-check", 1.0),
    (4, "oracle soundness and tightness", 300.0),
    (5, "shifted-oscillator beta", 30.0),
    (6, "squeezed determinant identity", 30.0),
    (7, "canonical metric and energy PVM", 5.0),
    (8, "curvature vs SLD commutator", 10.0),
    (9, "time-energy measurement", 5.0),
    (10, "property sweeps", 120.0),
    (11, "adaptive qMLE reaches the bound", 600.0),
];

pub fn run_criterion(id: u8, opts: &SelftestOptions) -> Result<CriterionOutcome> {
    let &(_, name, budget) =
        CRITERIA.iter().find(|c| c.0 == id).ok_or_else(|| QestimError::validation(format!("no criterion {id}")))?;
    let start = Instant::now();
    let res = match id {
        1 => spin_formulas(opts.seed),
        2 => closed_form_consistency(),
        3 => coherent_cross_check(),
        4 => oracle_soundness(opts.seed),
        5 => shifted_oscillator(),
        6 => squeezed_determinant(),
        7 => canonical_identity(opts.seed),
        8 => curvature_commutator(opts.seed),
        9 => time_energy(),
        10 => property_sweeps(opts.seed),
        _ => qmle_conjecture(opts),
    };
    let (passed, detail) = match res {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Ok(CriterionOutcome {
        id,
        name: name.into(),
        gating: !EXPLORATORY.contains(&id),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
        budget_seconds: budget,
    })
}

pub fn run_all(opts: &SelftestOptions) -> Vec<CriterionOutcome> {
    CRITERIA
        .iter()
        .filter(|c| opts.include_exploratory || !EXPLORATORY.contains(&c.0))
        .filter_map(|c| run_criterion(c.0, opts).ok())
        .collect()
}

/// True when every gating check passed or is a documented deviation.
pub fn gating_ok(outcomes: &[CriterionOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed || !o.gating || o.documented_deviation().is_some())
}

type Check = Result<(bool, String)>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_abs_diff(a: &RMatrix, b: &RMatrix) -> f64 {
    (a - b).amax()
}

// ---------------------------------------------------------------------------
// 1

fn spin_formulas(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51);
    let mut worst_js = 0.0f64;
    let mut worst_beta = 0.0f64;
    for (s, m) in [(0.5, 0.5), (1.0, 0.0), (1.0, 1.0), (1.5, 0.5)] {
        let model = zoo::spin_coherent(s, m, 1.0)?.with_tangent_mode(TangentMode::FiniteDifference);
        let c = s * s + s - m * m;
        for _ in 0..5 {
            let theta = [rng.random_range(0.3..std::f64::consts::PI - 0.3), rng.random_range(-3.0..3.0)];
            let geom = info_geometry(&tangent_frame(&model, &theta)?)?;
            let expect = [2.0 * c, 2.0 * c * theta[0].sin().powi(2)];
            for i in 0..2 {
                worst_js = worst_js.max(rel(geom.js[(i, i)], expect[i]));
            }
            worst_js = worst_js.max(geom.js[(0, 1)].abs() / expect[0]);
            let beta = geom.beta_spectrum[0];
            let want = m.abs() / c;
            worst_beta = worst_beta.max(if want == 0.0 { beta } else { rel(beta, want) });
        }
    }
    Ok((worst_js <= 1e-6 && worst_beta <= 1e-6, format!("max rel error J^S {worst_js:.2e}, beta {worst_beta:.2e}")))
}

// ---------------------------------------------------------------------------
// 2

fn closed_form_consistency() -> Check {
    let (mut ea, mut eb, mut ec) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..=10 {
        let beta = k as f64 / 10.0;
        let closed = two_param_js_value(beta);
        ea = ea.max((2.0 * boundary_z(beta, 0.0)? - closed).abs()).max((2.0 * boundary_z_at_zero(beta) - closed).abs());
        let geom = info_geometry(&tangent_frame(&zoo::synthetic_blocks(&[beta])?, &[0.0, 0.0])?)?;
        eb = eb.max(rel(cr_general_js(&geom)?.cr_value, closed));
        let g = WeightMatrix::new(geom.js.clone())?;
        eb = eb.max(rel(cr_two_param(&geom, &g)?.cr_value, closed));
        if k == 10 {
            ec = rel(cr_coherent(&geom, &g)?.cr_value, closed);
        }
    }
    Ok((
        ea <= 1e-12 && eb <= 1e-10 && ec <= 1e-10,
        format!("boundary {ea:.2e}, general/two-param {eb:.2e}, coherent {ec:.2e}"),
    ))
}

// ---------------------------------------------------------------------------
// 3

fn coherent_cross_check() -> Check {
    let js = RMatrix::identity(2, 2);
    let jt = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let geom = geometry_from_matrices(js, jt, true, &Tolerances::default())?;
    let g = WeightMatrix::new(RMatrix::from_diagonal(&crate::RVector::from_vec(vec![1.0, 4.0])))?;
    let a = cr_two_param(&geom, &g)?.cr_value;
    let b = cr_coherent(&geom, &g)?.cr_value;
    let ok = (a - 9.0).abs() <= 1e-8 && (b - 9.0).abs() <= 1e-8;
    Ok((ok, format!("two-param {a:.12}, coherent {b:.12}")))
}

// ---------------------------------------------------------------------------
// 4

fn oracle_soundness(seed: u64) -> Check {
    let cfg = SearchConfig::with_seed(seed);
    let tol = Tolerances::default();

    let spin = zoo::spin_coherent(0.5, 0.5, 1.0)?;
    let theta = [1.0, 0.4];
    let frame = tangent_frame(&spin, &theta)?;
    let geom = info_geometry(&frame)?;
    let g = WeightMatrix::new(geom.js.clone())?;
    let r1 = oracle_frame(&frame, &g, &cfg, None, &tol)?;
    let spin_ok = r1.best_value >= 4.0 - 1e-9 && r1.best_value <= 4.12;

    let synth = zoo::synthetic_blocks(&[0.6])?;
    let sframe = tangent_frame(&synth, &[0.0, 0.0])?;
    let sgeom = info_geometry(&sframe)?;
    let gi = WeightMatrix::identity(2);
    let closed = cr_two_param(&sgeom, &gi)?;
    let r2 = oracle_frame(&sframe, &gi, &cfg, None, &tol)?;
    verify_bound(&closed, &r2)?;
    let synth_ok = r2.best_value >= closed.cr_value - 1e-9 && r2.best_value <= 2.30;

    let plan = optimal_measurement_frame(&sframe, &gi, &tol)?;
    let warm = warm_start_basis(&plan.pvm)?;
    let wcfg = SearchConfig { restarts: 1, local_steps: 0, ..cfg.clone() };
    let rw = oracle_frame(&sframe, &gi, &wcfg, Some(&warm), &tol)?;
    let gap = verify_bound(&closed, &rw)?.gap_above;
    let warm_ok = gap.abs() <= 1e-8;
    Ok((
        spin_ok && synth_ok && warm_ok,
        format!(
            "spin best {:.6} in [4, 4.12]; beta=0.6 best {:.6} vs {:.6}; warm gap {gap:.1e}",
            r1.best_value, r2.best_value, closed.cr_value
        ),
    ))
}

// ---------------------------------------------------------------------------
// 5

fn shifted_oscillator() -> Check {
    let mut worst_beta = 0.0f64;
    let mut worst_js = 0.0f64;
    for n in [0usize, 1, 5] {
        let hbar = 1.0;
        let model = zoo::pm_shift_fock(n, 128, hbar)?;
        let geom = info_geometry(&tangent_frame(&model, &[0.2, -0.1])?)?;
        worst_beta = worst_beta.max((geom.beta_spectrum[0] - 1.0 / (2 * n + 1) as f64).abs());
        let want = 4.0 * (n as f64 + 0.5) / hbar;
        worst_js = worst_js.max((geom.js[(0, 0)] - want).abs()).max((geom.js[(1, 1)] - want).abs());
    }
    Ok((worst_beta <= 1e-6 && worst_js <= 1e-6, format!("max |beta error| {worst_beta:.2e}, max |J^S error| {worst_js:.2e}")))
}

// ---------------------------------------------------------------------------
// 6

fn squeezed_determinant() -> Check {
    let hbar = 1.0;
    let model = zoo::squeezed(64, hbar)?;
    let mut worst_pair = 0.0f64;
    let mut worst_formula = 0.0f64;
    let mut ratio = 0.0;
    for t3 in [0.1, 0.3, 0.6] {
        let geom = info_geometry(&tangent_frame(&model, &[0.3, -0.2, t3, 0.25])?)?;
        let (dj, dt) = (geom.det_js(), geom.det_jtilde());
        let want = 4.0 / (hbar * hbar) * (2.0 * t3).sinh().powi(2);
        worst_pair = worst_pair.max(rel(dt, dj));
        worst_formula = worst_formula.max(rel(dj, want)).max(rel(dt, want));
        ratio = dj / want;
    }
    Ok((
        worst_pair <= 1e-5 && worst_formula <= 1e-5,
        format!("|det J^S| vs |det J̃| {worst_pair:.2e}; vs 4 sinh^2(2θ³)/ℏ² {worst_formula:.2e} (ratio {ratio:.6})"),
    ))
}

// ---------------------------------------------------------------------------
// 7

fn canonical_identity(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
    let mut worst_js = 0.0f64;
    let mut worst_pvm = 0.0f64;
    for levels in [2usize, 5] {
        let energies: Vec<f64> = (0..levels).map(|_| rng.random_range(0.0..3.0)).collect();
        let k_b = rng.random_range(0.5..2.0);
        let fam = zoo::Canonical::new(energies.clone(), k_b)?;
        let model = zoo::canonical(energies, k_b, 1.0)?;
        let effects: Vec<CMatrix> = (0..levels)
            .map(|k| {
                let e = crate::models::fock::fock_state(levels, k);
                outer(&e, &e)
            })
            .collect();
        for i in 0..10 {
            let t = 0.2 * 1.5f64.powi(i);
            let geom = info_geometry(&tangent_frame(&model, &[t])?)?;
            let js = geom.js[(0, 0)];
            worst_js = worst_js.max(rel(js, fam.heat_capacity(t)? / (k_b * t * t)));
            let jm = classical_fisher(&outcome_distribution(&model, &[t], &effects)?, &Tolerances::default()).j[(0, 0)];
            worst_pvm = worst_pvm.max(rel(jm, js));
        }
    }
    Ok((worst_js <= 1e-8 && worst_pvm <= 1e-8, format!("J^S vs C/(k_B T^2) {worst_js:.2e}; energy PVM {worst_pvm:.2e}")))
}

// ---------------------------------------------------------------------------
// 8

fn random_unit3<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.2 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Curvature and commutator norms of a random faithful qubit model with two
/// parameters. `commuting` picks parallel Bloch directions.
pub fn qubit_curvature_pair(seed: u64, commuting: bool) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unit3(&mut rng);
    let r = rng.random_range(0.1..0.7);
    let r0 = [u[0] * r, u[1] * r, u[2] * r];
    let a = random_unit3(&mut rng);
    let b = if commuting {
        let k = rng.random_range(0.3..1.5);
        [a[0] * k, a[1] * k, a[2] * k]
    } else {
        random_unit3(&mut rng)
    };
    let model = zoo::bloch_affine(r0, vec![a, b])?;
    let theta = [rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)];
    let c = uhlmann_curvature(&model, &theta, CURVATURE_STEP)?;
    Ok((c.max_norm(), max_sld_commutator(&c.slds)))
}

fn curvature_commutator(seed: u64) -> Check {
    let mut agree = 0;
    let mut worst = String::new();
    let (mut flat_max, mut curved_min) = (0.0f64, f64::INFINITY);
    for k in 0..20u64 {
        let commuting = k % 2 == 0;
        let (f, c) = qubit_curvature_pair(seed.wrapping_add(k), commuting)?;
        let ok = (f <= 1e-6) == (c <= 1e-6) && (f <= 1e-6) == commuting;
        if ok {
            agree += 1;
        } else if worst.is_empty() {
            worst = format!("; instance {k}: |F| {f:.2e}, |[L1,L2]| {c:.2e}");
        }
        if commuting {
            flat_max = flat_max.max(f.max(c));
        } else {
            curved_min = curved_min.min(f.min(c));
        }
    }
    Ok((
        agree == 20,
        format!("{agree}/20 agree; commuting max {flat_max:.2e}, non-commuting min {curved_min:.2e}{worst}"),
    ))
}

// ---------------------------------------------------------------------------
// 9

/// Observed order at or above this counts as second order.
pub const ORDER_FLOOR: f64 = 1.95;

fn time_energy() -> Check {
    let hbar = 1.0;
    let omega = 1.3;
    let sx = CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let h = sx * C64::new(hbar * omega / 2.0, 0.0);
    let psi0 = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let mut worst_j = 0.0f64;
    for t0 in [0.0, 0.4, 1.1] {
        let r = time_energy_report(&h, &psi0, t0, 1e-3, 100, hbar)?;
        worst_j = worst_j.max(rel(r.j_mms, 4.0 * r.energy_variance / (hbar * hbar)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x7E);
    let d = 4;
    let a = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let hr = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    let mut v = CVector::from_fn(d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    v /= C64::new(v.norm(), 0.0);
    let r = time_energy_report(&hr, &v, 0.3, 1e-3, 100, hbar)?;
    worst_j = worst_j.max(rel(r.j_mms, 4.0 * r.energy_variance / (hbar * hbar)));

    let (_, o1) = w_ratio_convergence(&h, &psi0, hbar, 0.4, 6)?;
    let (_, o2) = w_ratio_convergence(&hr, &v, hbar, 0.2, 6)?;
    let min_order = o1.iter().chain(&o2).rev().take(3).fold(f64::INFINITY, |m, &x| m.min(x));
    let last = [*o1.last().unwrap_or(&0.0), *o2.last().unwrap_or(&0.0)];
    Ok((
        worst_j <= 1e-8 && o1.iter().chain(&o2).all(|&o| o >= ORDER_FLOOR),
        format!(
            "J_Mms vs 4<dH^2>/hbar^2 {worst_j:.2e}; observed orders (Rabi, random) {:.4}, {:.4}, min {min_order:.4}",
            last[0], last[1]
        ),
    ))
}

// ---------------------------------------------------------------------------
// 10

fn property_sweeps(seed: u64) -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut record = |name: &str, value: f64, limit: f64| {
        if !(value <= limit) {
            ok = false;
        }
        notes.push(format!("{name} {value:.1e}"));
    };

    let mut gauge = 0.0f64;
    let mut beta = 0.0f64;
    let mut reparam = 0.0f64;
    let mut mono = 0.0f64;
    let mut pvm = 0.0f64;
    for k in 0..24u64 {
        let s = seed.wrapping_mul(31).wrapping_add(k);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let (ts, tm) = [(1u32, 1i64), (2, 0), (2, 2), (3, 1)][(k % 4) as usize];
        let theta = [rng.random_range(0.3..2.8), rng.random_range(-3.0..3.0)];
        let phase = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        gauge = gauge.max(gauge_defect(ts, tm, theta, phase)?);
        beta = beta.max(max_beta_random_pure(s)? - 1.0);
        reparam = reparam.max(reparametrization_defect(s)?);
        mono = mono.max(monotonicity_violation(s)?);
        pvm = pvm.max(random_pvm_defect(s)?);
    }
    record("gauge", gauge, 1e-7);
    record("beta-1", beta, 1e-9);
    record("reparam", reparam, 1e-9);
    record("monotone", mono, 1e-12);
    record("pvm", pvm, 1e-9);
    let mut hb = 0.0f64;
    for n in [0usize, 2] {
        for hbar in [0.5, 2.0] {
            let (c, b) = hbar_scaling_defect(n, hbar)?;
            hb = hb.max(c).max(b);
        }
    }
    record("hbar", hb, 1e-8);
    let det = oracle_deterministic(seed)?;
    if !det {
        ok = false;
    }
    notes.push(format!("oracle-determinism {det}"));
    Ok((ok, notes.join(", ")))
}

/// Relative change of `J^S` and `J̃` when spin coherent states are
/// multiplied by `exp(i(c₀ + c₁θ¹ + c₂ sin θ²))`.
pub fn gauge_defect(twice_s: u32, twice_m: i64, theta: [f64; 2], coeffs: [f64; 3]) -> Result<f64> {
    let base = zoo::spin_coherent(twice_s as f64 / 2.0, twice_m as f64 / 2.0, 1.0)?;
    let dim = base.dim();
    let inner = base.clone();
    let phased = zoo::from_fn("phased_spin", dim, 2, move |t| {
        let ph = C64::from_polar(1.0, coeffs[0] + coeffs[1] * t[0] + coeffs[2] * t[1].sin());
        match inner.state_at(t) {
            Ok(s) => s.vector().cloned().unwrap_or_else(|| CVector::zeros(dim)) * ph,
            Err(_) => CVector::zeros(dim),
        }
    })
    .with_fd_step(1e-5);
    let a = info_geometry(&tangent_frame(&base, &theta)?)?;
    let b = info_geometry(&tangent_frame(&phased, &theta)?)?;
    let scale = a.js.amax().max(1e-300);
    Ok(max_abs_diff(&a.js, &b.js).max(max_abs_diff(&a.jtilde, &b.jtilde)) / scale)
}

fn random_state<R: Rng>(rng: &mut R, d: usize) -> CVector {
    let mut v = CVector::from_fn(d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let n = v.norm();
    v /= C64::new(n, 0.0);
    v
}

/// A random pure model at `θ = 0` in dimension `d` with `m` parameters.
pub fn random_pure_model(seed: u64, d: usize, m: usize) -> Result<crate::models::ParametricModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = random_state(&mut rng, d);
    let tangents = (0..m).map(|_| random_state(&mut rng, d) * C64::new(rng.random_range(0.3..1.5), 0.0)).collect();
    zoo::explicit_pure(phi, tangents, vec![0.0; m])
}

/// Largest β of a random pure model with 2 to 4 parameters.
pub fn max_beta_random_pure(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xBE7A);
    let m = rng.random_range(2..=4usize);
    let d = rng.random_range(m + 1..=m + 4);
    let model = random_pure_model(seed, d, m)?;
    let geom = info_geometry(&tangent_frame(&model, &vec![0.0; m])?)?;
    Ok(geom.beta_spectrum.first().copied().unwrap_or(0.0))
}

/// A random two-parameter geometry with the given normalized β, and a
/// random positive definite weight.
pub fn random_geometry2(seed: u64, beta: f64) -> Result<(crate::geometry::InfoGeometry, WeightMatrix)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = RMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
    let js = &a * a.transpose() + RMatrix::identity(2, 2) * 0.2;
    let h = real_symmetric_map(&js, f64::sqrt);
    let eps = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let jt = &h * eps * &h * beta;
    let b = RMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
    let g = &b * b.transpose() + RMatrix::identity(2, 2) * 0.1;
    Ok((geometry_from_matrices(js, jt, true, &Tolerances::default())?, WeightMatrix::new((&g + g.transpose()) * 0.5)?))
}

/// `|CR' − CR| / CR` under `θ = Aη` with `G' = AᵀGA`.
pub fn reparametrization_defect(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA11);
    let beta = rng.random_range(0.0..1.0);
    let (geom, g) = random_geometry2(seed, beta)?;
    let a = loop {
        let a = RMatrix::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0));
        if a.determinant().abs() > 0.3 {
            break a;
        }
    };
    let js2 = a.transpose() * &geom.js * &a;
    let jt2 = a.transpose() * &geom.jtilde * &a;
    let g2 = a.transpose() * g.matrix() * &a;
    let geom2 = geometry_from_matrices((&js2 + js2.transpose()) * 0.5, (&jt2 - jt2.transpose()) * 0.5, true, &Tolerances::default())?;
    let c1 = cr_two_param(&geom, &g)?.cr_value;
    let c2 = cr_two_param(&geom2, &WeightMatrix::new((&g2 + g2.transpose()) * 0.5)?)?.cr_value;
    Ok(rel(c2, c1))
}

/// Largest relative decrease of `CR(G)` along an increasing β grid.
pub fn monotonicity_violation(seed: u64) -> Result<f64> {
    let mut prev: Option<f64> = None;
    let mut worst = 0.0f64;
    for k in 0..=20 {
        let (geom, g) = random_geometry2(seed, k as f64 / 20.0)?;
        let c = cr_two_param(&geom, &g)?.cr_value;
        if let Some(p) = prev {
            worst = worst.max((p - c) / p);
        }
        prev = Some(c);
    }
    Ok(worst)
}

/// PVM defect plus unbiasedness defect of the optimal measurement of a
/// random two-parameter pure model.
pub fn random_pvm_defect(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9F);
    let d = rng.random_range(3..=5usize);
    let model = random_pure_model(seed, d, 2)?;
    let frame = tangent_frame(&model, &[0.0, 0.0])?;
    let b = RMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
    let g = WeightMatrix::new(&b * b.transpose() + RMatrix::identity(2, 2) * 0.1)?;
    let plan = optimal_measurement_frame(&frame, &g, &Tolerances::default())?;
    let defect = plan.pvm.pvm_defect();
    let gap = rel(plan.min_weighted_variance, plan.bound.cr_value);
    Ok(defect.max(gap * 1e-3))
}

/// Relative deviations of `CR(I)(ℏ)/ℏ` from `CR(I)(1)` and of β from its
/// `ℏ = 1` value for the shifted Fock state `n`.
pub fn hbar_scaling_defect(n: usize, hbar: f64) -> Result<(f64, f64)> {
    let trunc = 40 + 8 * n;
    let g = WeightMatrix::identity(2);
    let at = |h: f64| -> Result<(f64, f64)> {
        let model = zoo::pm_shift_fock(n, trunc, h)?;
        let geom = info_geometry(&tangent_frame(&model, &[0.1 * h.sqrt(), -0.05 * h.sqrt()])?)?;
        Ok((cr_two_param(&geom, &g)?.cr_value, geom.beta_spectrum[0]))
    };
    let (c1, b1) = at(1.0)?;
    let (ch, bh) = at(hbar)?;
    Ok((rel(ch / hbar, c1), (bh - b1).abs()))
}

/// Two oracle runs with the same seed agree bit for bit.
pub fn oracle_deterministic(seed: u64) -> Result<bool> {
    let model = zoo::spin_coherent(1.0, 1.0, 1.0)?;
    let cfg = SearchConfig { restarts: 6, local_steps: 300, seed, ..Default::default() };
    let g = WeightMatrix::identity(2);
    let a = oracle_min_weighted_variance(&model, &[1.1, 0.3], &g, &cfg)?;
    let b = oracle_min_weighted_variance(&model, &[1.1, 0.3], &g, &cfg)?;
    Ok(a.best_value.to_bits() == b.best_value.to_bits()
        && a.restart_values.iter().zip(&b.restart_values).all(|(x, y)| x.to_bits() == y.to_bits()))
}

// ---------------------------------------------------------------------------
// 11

fn qmle_conjecture(opts: &SelftestOptions) -> Check {
    let model = zoo::spin_coherent(0.5, 0.5, 1.0)?;
    let theta = [1.0, 0.4];
    let geom = info_geometry(&tangent_frame(&model, &theta)?)?;
    let g = WeightMatrix::new(geom.js.clone())?;
    let cfg = QmleConfig {
        n_samples: opts.qmle_samples,
        trials: opts.qmle_trials,
        seed: opts.seed,
        policy: MeasurementPolicy::Adaptive,
        ..Default::default()
    };
    let run = simulate_gqmle(&model, &theta, &g, &cfg)?;
    let ratio = run.scaled_risk / 4.0;
    Ok((
        (ratio - 1.0).abs() <= 0.15,
        format!(
            "N Tr G V = {:.4} ({} trials, N = {}, {} flagged), ratio to 4: {ratio:.4}",
            run.scaled_risk, cfg.trials, cfg.n_samples, run.flagged
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_criteria_pass() {
        let opts = SelftestOptions::default();
        for id in [2u8, 3, 7] {
            let o = run_criterion(id, &opts).unwrap();
            assert!(o.passed, "{}", o.line());
        }
    }

    #[test]
    fn curvature_instances_separate() {
        let (f, c) = qubit_curvature_pair(5, true).unwrap();
        assert!(f < 1e-6 && c < 1e-6, "{f} {c}");
        let (f, c) = qubit_curvature_pair(5, false).unwrap();
        assert!(f > 1e-3 && c > 1e-3, "{f} {c}");
    }

    #[test]
    fn deviation_lookup() {
        let o = CriterionOutcome {
            id: 6,
            name: "x".into(),
            gating: true,
            passed: false,
            detail: String::new(),
            seconds: 0.0,
            budget_seconds: 1.0,
        };
        assert!(o.documented_deviation().is_some());
        assert!(gating_ok(&[o]));
    }
}
