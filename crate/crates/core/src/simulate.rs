//! Monte-Carlo runs: adaptive maximum-likelihood estimation with
//! re-optimized measurements, and the time-energy detection test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::WeightMatrix;
use crate::geometry::info_geometry_with;
use crate::measurements::{classical_fisher, optimal_measurement, outcome_distribution_frame};
use crate::models::zoo::TimeEvolution;
use crate::models::{horizontal_lift, tangent_frame, tangents, ParametricModel, Tangent, TangentFrame};
use crate::operators::{outer, real_symmetric_eigen, spd_inverse, QuantumState};
use crate::oracle::random_unitary;
use crate::{CMatrix, CVector, QestimError, RMatrix, RVector, Result, Tolerances, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementPolicy {
    /// Optimal measurement at the current estimate, refreshed every
    /// `reoptimize_every` steps.
    Adaptive,
    /// Optimal measurement at the true parameter, never changed.
    FixedAtTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmleConfig {
    pub n_samples: usize,
    pub trials: usize,
    pub seed: u64,
    pub reoptimize_every: usize,
    pub policy: MeasurementPolicy,
    /// Starting estimate; `None` starts at the true parameter.
    pub initial_estimate: Option<Vec<f64>>,
    /// Steps at which estimates are recorded, besides the last one.
    pub checkpoints: Vec<usize>,
    /// Estimates never leave the ball of this radius, in units of
    /// `1/√λ_min(J^S)`, around the starting estimate.
    pub localization: f64,
}

impl Default for QmleConfig {
    fn default() -> Self {
        QmleConfig {
            n_samples: 2000,
            trials: 500,
            seed: 0,
            reoptimize_every: 1,
            policy: MeasurementPolicy::Adaptive,
            initial_estimate: None,
            checkpoints: vec![],
            localization: DEFAULT_LOCALIZATION,
        }
    }
}

/// Steps during which every likelihood maximization starts from a grid.
pub const GRID_STEPS: usize = 50;
/// Default localization radius; keeps estimates in the chart of the
/// starting point when distinct parameters give the same state.
pub const DEFAULT_LOCALIZATION: f64 = 0.5;
/// Trust-region radius in units of `1/√(i λ_min(J^S))`.
pub const TRUST_RADIUS: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct QmleTrial {
    pub index: usize,
    /// `(step, estimate)` at the checkpoints and at `N`.
    pub trajectory: Vec<(usize, Vec<f64>)>,
    pub estimate: Vec<f64>,
    pub flagged: bool,
    /// Steps where the optimal measurement could not be built and the
    /// default one was used.
    pub fallback_steps: usize,
}

#[derive(Debug, Clone)]
pub struct QmleRun {
    pub config: QmleConfig,
    pub theta_true: Vec<f64>,
    pub g: RMatrix,
    pub trials: Vec<QmleTrial>,
    pub flagged: usize,
    /// Across-trial covariance of the final estimates.
    pub covariance: RMatrix,
    /// `N Tr G V̂`.
    pub scaled_risk: f64,
    /// `N Tr G E[(θ̂ − θ)(θ̂ − θ)ᵀ]`.
    pub scaled_mse: f64,
}

impl QmleRun {
    /// Median of `|θ̂ − θ|` over unflagged trials at a recorded step.
    pub fn median_error_at(&self, step: usize) -> Option<f64> {
        let th = RVector::from_column_slice(&self.theta_true);
        let mut errs: Vec<f64> = self
            .trials
            .iter()
            .filter(|t| !t.flagged)
            .filter_map(|t| t.trajectory.iter().find(|(s, _)| *s == step))
            .map(|(_, e)| (RVector::from_column_slice(e) - &th).norm())
            .collect();
        if errs.is_empty() {
            return None;
        }
        errs.sort_by(f64::total_cmp);
        Some(errs[errs.len() / 2])
    }

    /// Rows `trial,N,θ̂¹,…` for every recorded step.
    pub fn trials_csv(&self) -> String {
        let m = self.theta_true.len();
        let mut out = String::from("trial,n");
        for i in 0..m {
            out.push_str(&format!(",theta{}", i + 1));
        }
        out.push_str(",flagged\n");
        for t in &self.trials {
            for (s, e) in &t.trajectory {
                out.push_str(&format!("{},{}", t.index, s));
                for x in e {
                    out.push_str(&format!(",{x:?}"));
                }
                out.push_str(&format!(",{}\n", t.flagged));
            }
        }
        out
    }
}

/// Flattened effect `E` with `tr ρE = Re⟨ρ, E⟩_F` for Hermitian `ρ`.
#[derive(Debug, Clone)]
struct Effect(Vec<C64>);

impl Effect {
    fn new(e: &CMatrix) -> Self {
        Effect(e.iter().copied().collect())
    }

    fn pair(&self, a: &[C64]) -> f64 {
        self.0.iter().zip(a).map(|(e, r)| e.re * r.re + e.im * r.im).sum()
    }
}

/// `ρ` and `∂_iρ` at a point, flattened column-major.
struct LocalState {
    rho: Vec<C64>,
    drho: Vec<Vec<C64>>,
}

fn local_state(model: &ParametricModel, theta: &[f64], with_derivatives: bool) -> Result<LocalState> {
    let state = model.state_at(theta)?;
    let rho = state.density();
    let drho = if with_derivatives {
        tangents(model, theta)?
            .into_iter()
            .map(|t| match (t, &state) {
                (Tangent::Vector(d), QuantumState::Pure(phi)) => &d * phi.adjoint() + phi * d.adjoint(),
                (Tangent::Matrix(d), _) => d,
                (Tangent::Vector(_), QuantumState::Mixed(_)) => CMatrix::zeros(rho.nrows(), rho.ncols()),
            })
            .map(|d| d.iter().copied().collect())
            .collect()
    } else {
        vec![]
    };
    Ok(LocalState { rho: rho.iter().copied().collect(), drho })
}

/// Accumulated log-likelihood `Σ log tr ρ(θ)E_k`.
struct Likelihood<'a> {
    model: &'a ParametricModel,
    effects: Vec<Effect>,
}

impl Likelihood<'_> {
    fn value(&self, theta: &[f64]) -> f64 {
        let Ok(ls) = local_state(self.model, theta, false) else { return f64::NEG_INFINITY };
        let mut total = 0.0;
        for e in &self.effects {
            let p = e.pair(&ls.rho);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += p.ln();
        }
        total
    }

    /// Value, gradient and the scoring matrix `Σ ∂p∂pᵀ/p²`.
    fn scoring(&self, theta: &[f64]) -> Option<(f64, RVector, RMatrix)> {
        let ls = local_state(self.model, theta, true).ok()?;
        let m = theta.len();
        let mut val = 0.0;
        let mut grad = RVector::zeros(m);
        let mut info = RMatrix::zeros(m, m);
        let mut dp = vec![0.0; m];
        for e in &self.effects {
            let p = e.pair(&ls.rho);
            if p <= 0.0 {
                return None;
            }
            val += p.ln();
            for (k, d) in ls.drho.iter().enumerate() {
                dp[k] = e.pair(d) / p;
            }
            for a in 0..m {
                grad[a] += dp[a];
                for b in 0..m {
                    info[(a, b)] += dp[a] * dp[b];
                }
            }
        }
        Some((val, grad, info))
    }
}

fn clamp_to_ball(center: &RVector, x: RVector, radius: f64) -> RVector {
    let d = &x - center;
    let n = d.norm();
    if n > radius {
        center + d * (radius / n)
    } else {
        x
    }
}

/// Ball constraint shared by every step of a trial.
struct Region<'a> {
    anchor: &'a RVector,
    anchor_radius: f64,
}

impl Region<'_> {
    fn clamp(&self, center: &RVector, x: RVector, radius: f64) -> RVector {
        clamp_to_ball(self.anchor, clamp_to_ball(center, x, radius), self.anchor_radius)
    }
}

/// Trust-region maximization: optional grid seed, then Fisher scoring with
/// backtracking, all inside the ball of `radius` around `center`.
fn maximize(lik: &Likelihood, center: &[f64], radius: f64, grid: bool, region: &Region) -> Option<Vec<f64>> {
    let m = center.len();
    let c = RVector::from_column_slice(center);
    let mut x = c.clone();
    let mut fx = lik.value(center);
    if grid || !fx.is_finite() {
        let per_axis: usize = if m <= 2 { 5 } else { 3 };
        let total = per_axis.pow(m as u32);
        for idx in 0..total {
            let mut k = idx;
            let mut pt = c.clone();
            for a in 0..m {
                let t = (k % per_axis) as f64 / (per_axis - 1) as f64 * 2.0 - 1.0;
                k /= per_axis;
                pt[a] += t * radius / (m as f64).sqrt();
            }
            let pt = region.clamp(&c, pt, radius);
            let f = lik.value(pt.as_slice());
            if f > fx {
                fx = f;
                x = pt;
            }
        }
    }
    if !fx.is_finite() {
        return None;
    }
    for _ in 0..30 {
        let Some((f, grad, info)) = lik.scoring(x.as_slice()) else { break };
        fx = f;
        let step = match spd_inverse(&(&info + RMatrix::identity(m, m) * (1e-12 * info.trace().max(1e-300)))) {
            Some(inv) => inv * &grad,
            None => grad.clone(),
        };
        if step.norm() <= 1e-10 * (1.0 + x.norm()) {
            break;
        }
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..20 {
            let cand = region.clamp(&c, &x + &step * t, radius);
            let fc = lik.value(cand.as_slice());
            if fc > fx {
                let dx = (&cand - &x).norm();
                x = cand;
                moved = dx > 1e-10 * (1.0 + x.norm());
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Some(x.iter().copied().collect())
}

/// Fixed basis used before any estimate-dependent measurement exists: the
/// computational basis rotated by a seeded Haar unitary, so that every
/// outcome probability depends on every parameter generically.
pub fn default_measurement(dim: usize) -> Vec<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0001);
    let u = random_unitary(dim, &mut rng);
    (0..dim)
        .map(|k| {
            let b: CVector = u.column(k).into_owned();
            outer(&b, &b)
        })
        .collect()
}

fn base_effects(model: &ParametricModel, theta: &[f64], g: &WeightMatrix) -> Result<(Vec<CMatrix>, f64)> {
    let plan = optimal_measurement(model, theta, g)?;
    let effects = match plan.povm {
        Some(p) => p.elements,
        None => plan.pvm.projectors,
    };
    let (vals, _) = real_symmetric_eigen(&plan.geometry.js);
    Ok((effects, vals[0]))
}

fn sample(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, p) in probs.iter().enumerate() {
        if u < *p {
            return k;
        }
        u -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn run_trial(model: &ParametricModel, theta_true: &[f64], g: &WeightMatrix, cfg: &QmleConfig, index: usize, lambda_true: f64) -> Result<QmleTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let rho_true = model.state_at(theta_true)?.density();
    let prob = |effects: &[CMatrix]| -> Vec<f64> { effects.iter().map(|e| (&rho_true * e).trace().re.max(0.0)).collect() };
    let mut estimate = cfg.initial_estimate.clone().unwrap_or_else(|| theta_true.to_vec());
    let anchor = RVector::from_column_slice(&estimate);
    let anchor_radius = cfg.localization / lambda_true.max(1e-300).sqrt();
    let default = default_measurement(model.dim());
    let fixed = match cfg.policy {
        MeasurementPolicy::FixedAtTruth => Some(base_effects(model, theta_true, g)?.0),
        MeasurementPolicy::Adaptive => None,
    };
    let mut lik = Likelihood { model, effects: Vec::with_capacity(cfg.n_samples) };
    let mut current: Vec<CMatrix> = default.clone();
    let mut current_probs = prob(&current);
    let mut lambda_min = lambda_true;
    let mut trajectory = Vec::new();
    let mut fallback_steps = 0;
    let mut flagged = false;
    for i in 1..=cfg.n_samples {
        if let Some(f) = &fixed {
            if i == 1 {
                current = f.clone();
                current_probs = prob(&current);
            }
        } else if i > 1 && (i - 2) % cfg.reoptimize_every.max(1) == 0 {
            match base_effects(model, &estimate, g) {
                Ok((e, lm)) => {
                    current = e;
                    lambda_min = lm;
                }
                Err(_) => {
                    current = default.clone();
                    fallback_steps += 1;
                }
            }
            current_probs = prob(&current);
        }
        let k = sample(&current_probs, &mut rng);
        lik.effects.push(Effect::new(&current[k]));
        let radius = TRUST_RADIUS / (i as f64 * lambda_min.max(1e-300)).sqrt();
        let region = Region { anchor: &anchor, anchor_radius };
        match maximize(&lik, &estimate, radius, i <= GRID_STEPS, &region) {
            Some(x) => estimate = x,
            None => {
                flagged = true;
                break;
            }
        }
        if cfg.checkpoints.contains(&i) && i != cfg.n_samples {
            trajectory.push((i, estimate.clone()));
        }
    }
    trajectory.push((cfg.n_samples, estimate.clone()));
    Ok(QmleTrial { index, trajectory, estimate, flagged, fallback_steps })
}

/// Runs `trials` independent sequential estimations of `N` single-copy
/// measurements each.
pub fn simulate_gqmle(model: &ParametricModel, theta_true: &[f64], g: &WeightMatrix, cfg: &QmleConfig) -> Result<QmleRun> {
    if cfg.n_samples == 0 || cfg.trials < 2 {
        return Err(QestimError::validation("need N ≥ 1 and at least two trials"));
    }
    if g.dim() != model.n_params() {
        return Err(QestimError::validation("weight size differs from the parameter count"));
    }
    if let Some(init) = &cfg.initial_estimate {
        if init.len() != theta_true.len() {
            return Err(QestimError::validation("initial estimate has the wrong length"));
        }
    }
    let frame = tangent_frame(model, theta_true)?;
    let geom = info_geometry_with(&frame, &model.tol)?;
    let (vals, _) = real_symmetric_eigen(&geom.js);
    let lambda_true = vals[0];
    let trials: Vec<QmleTrial> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| run_trial(model, theta_true, g, cfg, k, lambda_true))
        .collect::<Result<_>>()?;
    let good: Vec<&QmleTrial> = trials.iter().filter(|t| !t.flagged).collect();
    let flagged = trials.len() - good.len();
    if good.len() < 2 {
        return Err(QestimError::Precondition(format!("{flagged} of {} trials had a degenerate likelihood", trials.len())));
    }
    let m = theta_true.len();
    let n = good.len() as f64;
    let mut mean = RVector::zeros(m);
    for t in &good {
        mean += RVector::from_column_slice(&t.estimate);
    }
    mean /= n;
    let th = RVector::from_column_slice(theta_true);
    let mut cov = RMatrix::zeros(m, m);
    let mut mse = RMatrix::zeros(m, m);
    for t in &good {
        let e = RVector::from_column_slice(&t.estimate);
        let d = &e - &mean;
        cov += &d * d.transpose();
        let d = &e - &th;
        mse += &d * d.transpose();
    }
    cov /= n - 1.0;
    mse /= n;
    let big_n = cfg.n_samples as f64;
    Ok(QmleRun {
        config: cfg.clone(),
        theta_true: theta_true.to_vec(),
        g: g.matrix().clone(),
        scaled_risk: big_n * (g.matrix() * &cov).trace(),
        scaled_mse: big_n * (g.matrix() * &mse).trace(),
        covariance: cov,
        flagged,
        trials,
    })
}

// ---------------------------------------------------------------------------
// time-energy

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestPowerReport {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
    pub hbar: f64,
    pub energy_variance: f64,
    /// `1 − |⟨ψ0|U(Δt)|ψ0⟩|²`.
    pub w: f64,
    /// `Δt²⟨ΔH²⟩/ℏ²`.
    pub w_quadratic: f64,
    pub js: f64,
    /// Fisher information of `{|ψ(t0)⟩⟨ψ(t0)|, I − |ψ(t0)⟩⟨ψ(t0)|}` at `t0`,
    /// taken as the limit through the zero-probability outcome.
    pub j_mms: f64,
    /// `D(p(t0) ‖ p(t0 + Δt)) = −ln(1 − w)` for that measurement.
    pub stein_exponent: f64,
    /// `1 − exp(−N · stein_exponent)`.
    pub power: f64,
    /// `1 − exp(−N J_Mms Δt²/2)`, present in the quadratic regime.
    pub power_quadratic: Option<f64>,
    /// `|w / w_quadratic − 1| ≤ 0.05`.
    pub quadratic_regime: bool,
}

/// Relative deviation of `w` from its quadratic approximation that still
/// counts as the quadratic regime.
pub const QUADRATIC_REGIME_TOL: f64 = 0.05;

pub fn time_energy_report(h: &CMatrix, psi0: &CVector, t0: f64, dt: f64, n: usize, hbar: f64) -> Result<TestPowerReport> {
    if !(dt.is_finite() && t0.is_finite()) {
        return Err(QestimError::validation("t0 and Δt must be finite"));
    }
    if n == 0 {
        return Err(QestimError::validation("N must be positive"));
    }
    let fam = TimeEvolution::new(h.clone(), psi0.clone(), hbar)?;
    let var = fam.energy_variance();
    let psi_t0 = &fam.propagator(t0) * fam.psi0();
    let ov = fam.psi0().dotc(&(&fam.propagator(dt) * fam.psi0()));
    let w = (1.0 - ov.norm_sqr()).max(0.0);
    let w_quadratic = dt * dt * var / (hbar * hbar);
    let model = ParametricModel::new(fam, hbar);
    let frame = horizontal_lift(&model, &[t0])?;
    let js = info_geometry_with(&frame, &Tolerances::default())?.js[(0, 0)];
    let TangentFrame::Pure { lifts, .. } = &frame else { unreachable!() };
    let p_perp = CMatrix::identity(psi_t0.len(), psi_t0.len()) - outer(&psi_t0, &psi_t0);
    let j_mms = lifts[0].dotc(&(&p_perp * &lifts[0])).re;
    let stein = -(1.0 - w).max(f64::MIN_POSITIVE).ln();
    let quadratic_regime = w_quadratic > 0.0 && (w / w_quadratic - 1.0).abs() <= QUADRATIC_REGIME_TOL;
    let nn = n as f64;
    Ok(TestPowerReport {
        t0,
        dt,
        n,
        hbar,
        energy_variance: var,
        w,
        w_quadratic,
        js,
        j_mms,
        stein_exponent: stein,
        power: 1.0 - (-nn * stein).exp(),
        power_quadratic: quadratic_regime.then(|| 1.0 - (-0.5 * nn * j_mms * dt * dt).exp()),
        quadratic_regime,
    })
}

/// Classical Fisher information of the two-outcome measurement fixed at
/// `t0`, evaluated at `t0 + s`.
pub fn mms_fisher_at_offset(h: &CMatrix, psi0: &CVector, t0: f64, s: f64, hbar: f64) -> Result<f64> {
    let fam = TimeEvolution::new(h.clone(), psi0.clone(), hbar)?;
    let psi_t0 = &fam.propagator(t0) * fam.psi0();
    let p0 = outer(&psi_t0, &psi_t0);
    let p1 = CMatrix::identity(psi_t0.len(), psi_t0.len()) - &p0;
    let model = ParametricModel::new(fam, hbar);
    let frame = horizontal_lift(&model, &[t0 + s])?;
    let dist = outcome_distribution_frame(&frame, &[p0, p1])?;
    Ok(classical_fisher(&dist, &Tolerances::default()).j[(0, 0)])
}

/// `|1 − w/w_quadratic|` for `Δt = dt0, dt0/2, …` and the observed orders
/// `log₂(e_k / e_{k+1})`.
pub fn w_ratio_convergence(h: &CMatrix, psi0: &CVector, hbar: f64, dt0: f64, halvings: usize) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    let mut errs = Vec::with_capacity(halvings + 1);
    let mut dt = dt0;
    for _ in 0..=halvings {
        let r = time_energy_report(h, psi0, 0.0, dt, 1, hbar)?;
        errs.push((dt, (r.w / r.w_quadratic - 1.0).abs()));
        dt /= 2.0;
    }
    let orders = errs.windows(2).map(|w| (w[0].1 / w[1].1).log2()).collect();
    Ok((errs, orders))
}

/// `D(p(θ0) ‖ p(θ0 + Δ)) − ½ J_M Δ²` for a one-parameter model and a fixed
/// set of effects.
pub fn kl_quadratic_defect(model: &ParametricModel, theta0: f64, effects: &[CMatrix], delta: f64) -> Result<f64> {
    if model.n_params() != 1 {
        return Err(QestimError::validation("the KL expansion check is for one-parameter models"));
    }
    let f0 = tangent_frame(model, &[theta0])?;
    let d0 = outcome_distribution_frame(&f0, effects)?;
    let jm = classical_fisher(&d0, &model.tol).j[(0, 0)];
    let rho1 = model.state_at(&[theta0 + delta])?.density();
    let mut kl = 0.0;
    for (p, e) in d0.p.iter().zip(effects) {
        if *p <= 0.0 {
            continue;
        }
        let q = (&rho1 * e).trace().re;
        if q <= 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += p * (p / q).ln();
    }
    Ok(kl - 0.5 * jm * delta * delta)
}
