//! Parametric state families, their tangents, horizontal lifts and SLDs.

pub mod fock;
pub mod spec;
pub mod zoo;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::operators::{
    hermitian_eigendecomposition_with, max_abs, real_symmetric_eigen, symmetrize, QuantumState,
};
use crate::{CMatrix, CVector, QestimError, RMatrix, Result, Tolerances, C64};

/// Derivative of a state along one coordinate.
#[derive(Debug, Clone)]
pub enum Tangent {
    Vector(CVector),
    Matrix(CMatrix),
}

impl Tangent {
    pub fn as_vector(&self) -> Option<&CVector> {
        match self {
            Tangent::Vector(v) => Some(v),
            Tangent::Matrix(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&CMatrix> {
        match self {
            Tangent::Matrix(m) => Some(m),
            Tangent::Vector(_) => None,
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        match self {
            Tangent::Vector(v) => v.iter().fold(0.0, |m, z| m.max(z.norm())),
            Tangent::Matrix(a) => max_abs(a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangentMode {
    Analytic,
    FiniteDifference,
}

/// Closed-form metric data a family can attach for comparison.
#[derive(Debug, Clone)]
pub struct ReferenceGeometry {
    pub js: RMatrix,
    pub jtilde: RMatrix,
}

/// A map `θ ↦ state`. Implementations must be deterministic.
pub trait StateFamily: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn is_pure(&self) -> bool;
    fn state_at(&self, theta: &[f64], tol: &Tolerances) -> Result<QuantumState>;

    /// Exact derivatives, if the family knows them.
    fn analytic_tangents(&self, _theta: &[f64], _tol: &Tolerances) -> Option<Result<Vec<Tangent>>> {
        None
    }

    fn reference_geometry(&self, _theta: &[f64]) -> Option<ReferenceGeometry> {
        None
    }
}

/// A state family together with the numerical conventions used to
/// differentiate it.
#[derive(Clone)]
pub struct ParametricModel {
    family: Arc<dyn StateFamily>,
    pub hbar: f64,
    pub tangent_mode: TangentMode,
    pub fd_step: f64,
    pub tol: Tolerances,
}

impl fmt::Debug for ParametricModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricModel")
            .field("kind", &self.family.kind())
            .field("dim", &self.dim())
            .field("m", &self.n_params())
            .field("hbar", &self.hbar)
            .field("tangent_mode", &self.tangent_mode)
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

impl ParametricModel {
    pub fn new(family: impl StateFamily + 'static, hbar: f64) -> Self {
        Self::from_arc(Arc::new(family), hbar)
    }

    pub fn from_arc(family: Arc<dyn StateFamily>, hbar: f64) -> Self {
        ParametricModel {
            family,
            hbar,
            tangent_mode: TangentMode::Analytic,
            fd_step: DEFAULT_FD_STEP,
            tol: Tolerances::default(),
        }
    }

    pub fn with_tangent_mode(mut self, mode: TangentMode) -> Self {
        self.tangent_mode = mode;
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn family(&self) -> &Arc<dyn StateFamily> {
        &self.family
    }

    pub fn kind(&self) -> &'static str {
        self.family.kind()
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn n_params(&self) -> usize {
        self.family.n_params()
    }

    pub fn is_pure(&self) -> bool {
        self.family.is_pure()
    }

    pub fn state_at(&self, theta: &[f64]) -> Result<QuantumState> {
        self.check_theta(theta)?;
        self.family.state_at(theta, &self.tol)
    }

    pub fn reference_geometry(&self, theta: &[f64]) -> Option<ReferenceGeometry> {
        self.family.reference_geometry(theta)
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(QestimError::validation(format!(
                "theta has {} components, model '{}' has {} parameters",
                theta.len(),
                self.kind(),
                self.n_params()
            )));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(QestimError::validation("theta has non-finite components"));
        }
        Ok(())
    }
}

/// `∂_i` of the state at `θ`, analytic when available and requested,
/// otherwise by phase-aligned central differences.
pub fn tangents(model: &ParametricModel, theta: &[f64]) -> Result<Vec<Tangent>> {
    model.check_theta(theta)?;
    if model.tangent_mode == TangentMode::Analytic {
        if let Some(t) = model.family.analytic_tangents(theta, &model.tol) {
            return t;
        }
    }
    finite_difference_tangents(model, theta, model.fd_step)
}

/// Central differences with step `h`. Pure neighbors are rephased so their
/// overlap with the center is real positive.
pub fn finite_difference_tangents(model: &ParametricModel, theta: &[f64], h: f64) -> Result<Vec<Tangent>> {
    model.check_theta(theta)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(QestimError::validation(format!("fd_step must be positive, got {h}")));
    }
    let center = model.state_at(theta)?;
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[i] += h;
        tm[i] -= h;
        let sp = model.state_at(&tp)?;
        let sm = model.state_at(&tm)?;
        let scale = C64::new(1.0 / (2.0 * h), 0.0);
        match (&center, sp, sm) {
            (QuantumState::Pure(c), QuantumState::Pure(p), QuantumState::Pure(m)) => {
                let p = align_phase(c, p)?;
                let m = align_phase(c, m)?;
                out.push(Tangent::Vector((p - m) * scale));
            }
            (QuantumState::Mixed(_), QuantumState::Mixed(p), QuantumState::Mixed(m)) => {
                out.push(Tangent::Matrix((p - m) * scale));
            }
            _ => return Err(QestimError::internal("state kind changed between stencil points")),
        }
    }
    Ok(out)
}

fn align_phase(center: &CVector, v: CVector) -> Result<CVector> {
    let ov = center.dotc(&v);
    if ov.norm() < 1e-300 {
        return Err(QestimError::StepTooLarge { angle: std::f64::consts::FRAC_PI_2, limit: 0.5 });
    }
    let aligned = v * (ov.conj() / ov.norm());
    let drift = (aligned.norm() - 1.0).abs();
    if drift > 1e-6 {
        return Err(QestimError::validation(format!("norm drift {drift:.3e} after phase alignment")));
    }
    Ok(aligned)
}

/// Lifts and SLDs at one point.
#[derive(Debug, Clone)]
pub enum TangentFrame {
    Pure { theta: Vec<f64>, phi: CVector, lifts: Vec<CVector> },
    Faithful { theta: Vec<f64>, rho: CMatrix, drho: Vec<CMatrix>, slds: Vec<CMatrix> },
}

impl TangentFrame {
    pub fn theta(&self) -> &[f64] {
        match self {
            TangentFrame::Pure { theta, .. } | TangentFrame::Faithful { theta, .. } => theta,
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            TangentFrame::Pure { lifts, .. } => lifts.len(),
            TangentFrame::Faithful { slds, .. } => slds.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TangentFrame::Pure { phi, .. } => phi.len(),
            TangentFrame::Faithful { rho, .. } => rho.nrows(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, TangentFrame::Pure { .. })
    }

    /// Builds a pure frame directly from a base vector and lifts, enforcing
    /// the frame invariants.
    pub fn pure_from_lifts(theta: Vec<f64>, phi: CVector, lifts: Vec<CVector>, tol: &Tolerances) -> Result<Self> {
        let phi = match QuantumState::pure(phi, tol)? {
            QuantumState::Pure(v) => v,
            QuantumState::Mixed(_) => unreachable!(),
        };
        if lifts.iter().any(|l| l.len() != phi.len()) {
            return Err(QestimError::validation("lift dimension does not match the state"));
        }
        for (i, l) in lifts.iter().enumerate() {
            let ov = phi.dotc(l).norm();
            if ov > 1e-10 * l.norm().max(1.0) {
                return Err(QestimError::validation(format!("lift {i} is not orthogonal to the state ({ov:.3e})")));
            }
        }
        check_real_rank(&lifts, tol)?;
        Ok(TangentFrame::Pure { theta, phi, lifts })
    }

    /// Largest residual of the reconstruction of `∂_iρ` from the frame.
    pub fn reconstruction_residual(&self, tangents: &[Tangent]) -> f64 {
        let mut worst = 0.0f64;
        match self {
            TangentFrame::Pure { phi, lifts, .. } => {
                for (l, t) in lifts.iter().zip(tangents) {
                    let Some(dphi) = t.as_vector() else { return f64::INFINITY };
                    let drho = dphi * phi.adjoint() + phi * dphi.adjoint();
                    let rec = (l * phi.adjoint() + phi * l.adjoint()).scale(0.5);
                    worst = worst.max(max_abs(&(rec - drho)));
                }
            }
            TangentFrame::Faithful { rho, slds, drho, .. } => {
                for (l, d) in slds.iter().zip(drho) {
                    let rec = (l * rho + rho * l).scale(0.5);
                    worst = worst.max(max_abs(&(rec - d)));
                }
            }
        }
        worst
    }
}

fn check_real_rank(lifts: &[CVector], tol: &Tolerances) -> Result<()> {
    let m = lifts.len();
    let js = RMatrix::from_fn(m, m, |i, j| lifts[i].dotc(&lifts[j]).re);
    let (vals, _) = real_symmetric_eigen(&js);
    let max = vals.last().copied().unwrap_or(0.0);
    let rank = vals.iter().filter(|&&v| v > tol.rank * max.max(f64::MIN_POSITIVE)).count();
    if max <= 0.0 || rank < m {
        return Err(QestimError::RedundantParameters { rank: if max <= 0.0 { 0 } else { rank }, params: m });
    }
    Ok(())
}

/// `|l_i⟩ = 2(I − |φ⟩⟨φ|)|∂_iφ⟩` at `θ`.
pub fn horizontal_lift(model: &ParametricModel, theta: &[f64]) -> Result<TangentFrame> {
    if !model.is_pure() {
        return Err(QestimError::Precondition("horizontal lifts require a pure model; use sld_solve".into()));
    }
    let state = model.state_at(theta)?;
    let phi = state.vector().cloned().ok_or_else(|| QestimError::internal("pure model returned a mixed state"))?;
    let tans = tangents(model, theta)?;
    let lifts: Vec<CVector> = tans
        .iter()
        .map(|t| {
            let d = t.as_vector().ok_or_else(|| QestimError::internal("pure model returned a matrix tangent"))?;
            let ov = phi.dotc(d);
            Ok((d - &phi * ov) * C64::new(2.0, 0.0))
        })
        .collect::<Result<_>>()?;
    check_real_rank(&lifts, &model.tol)?;
    Ok(TangentFrame::Pure { theta: theta.to_vec(), phi, lifts })
}

/// Solves `∂ρ = ½(Lρ + ρL)` in the eigenbasis of `ρ`.
pub fn solve_sld(rho: &CMatrix, drho: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    let eig = hermitian_eigendecomposition_with(rho, tol)?;
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < tol.faithful {
        return Err(QestimError::NotFaithful { min_eigenvalue: min, threshold: tol.faithful });
    }
    let u = &eig.vectors;
    let d = u.adjoint() * drho * u;
    let n = rho.nrows();
    let lp = CMatrix::from_fn(n, n, |a, b| d[(a, b)] * (2.0 / (eig.values[a] + eig.values[b])));
    Ok(symmetrize(&(u * lp * u.adjoint())))
}

/// SLDs of a faithful mixed model at `θ`.
pub fn sld_solve(model: &ParametricModel, theta: &[f64]) -> Result<TangentFrame> {
    if model.is_pure() {
        return Err(QestimError::NotFaithful { min_eigenvalue: 0.0, threshold: model.tol.faithful });
    }
    let rho = model.state_at(theta)?.density();
    let tans = tangents(model, theta)?;
    let drho: Vec<CMatrix> = tans
        .into_iter()
        .map(|t| match t {
            Tangent::Matrix(m) => Ok(symmetrize(&m)),
            Tangent::Vector(_) => Err(QestimError::internal("mixed model returned a vector tangent")),
        })
        .collect::<Result<_>>()?;
    let slds = drho.iter().map(|d| solve_sld(&rho, d, &model.tol)).collect::<Result<Vec<_>>>()?;
    Ok(TangentFrame::Faithful { theta: theta.to_vec(), rho, drho, slds })
}

/// Lifts for pure models, SLDs for mixed ones.
pub fn tangent_frame(model: &ParametricModel, theta: &[f64]) -> Result<TangentFrame> {
    if model.is_pure() {
        horizontal_lift(model, theta)
    } else {
        sld_solve(model, theta)
    }
}

/// Largest relative discrepancy between analytic and finite-difference
/// tangents, or `None` if the family has no analytic tangents.
pub fn analytic_tangent_discrepancy(model: &ParametricModel, theta: &[f64]) -> Result<Option<f64>> {
    let Some(analytic) = model.family.analytic_tangents(theta, &model.tol) else {
        return Ok(None);
    };
    let analytic = analytic?;
    let fd = finite_difference_tangents(model, theta, model.fd_step)?;
    let state = model.state_at(theta)?;
    let mut worst = 0.0f64;
    for (a, f) in analytic.iter().zip(&fd) {
        let (diff, scale) = match (a, f, &state) {
            (Tangent::Vector(a), Tangent::Vector(f), QuantumState::Pure(phi)) => {
                // compare the horizontal parts; the vertical part is gauge
                let pa = a - phi * phi.dotc(a);
                let pf = f - phi * phi.dotc(f);
                ((&pa - &pf).norm(), pa.norm())
            }
            (Tangent::Matrix(a), Tangent::Matrix(f), _) => ((a - f).norm(), a.norm()),
            _ => return Err(QestimError::internal("tangent kinds differ")),
        };
        worst = worst.max(diff / scale.max(1e-12));
    }
    Ok(Some(worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::info_geometry;
    use crate::models::zoo;
    use crate::operators::max_abs;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn qubit_tangent_at_zero() {
        let m = zoo::qubit_great_circle();
        let t = tangents(&m, &[0.0]).unwrap();
        let v = t[0].as_vector().unwrap();
        assert!((v[0] - c(0.0, 0.0)).norm() < 1e-8 && (v[1] - c(0.5, 0.0)).norm() < 1e-8);
        let f = horizontal_lift(&m, &[0.0]).unwrap();
        let TangentFrame::Pure { lifts, .. } = &f else { panic!() };
        assert!((lifts[0][1] - c(1.0, 0.0)).norm() < 1e-8);
        assert!((lifts[0].norm_squared() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_model_has_zero_tangent_and_is_redundant() {
        let m = zoo::from_fn("constant", 2, 1, |_| CVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]));
        let t = tangents(&m, &[0.3]).unwrap();
        assert!(t[0].max_abs() < 1e-12);
        assert!(matches!(horizontal_lift(&m, &[0.3]), Err(QestimError::RedundantParameters { .. })));
    }

    #[test]
    fn spin_step_halving_consistency() {
        let m = zoo::spin_coherent(1.0, 1.0, 1.0).unwrap();
        let th = [0.8, 0.4];
        let a = finite_difference_tangents(&m, &th, 1e-4).unwrap();
        let b = finite_difference_tangents(&m, &th, 1e-6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.as_vector().unwrap() - y.as_vector().unwrap()).norm() < 1e-7);
        }
    }

    #[test]
    fn spin_lift_is_projected_generator() {
        let fam = zoo::SpinCoherent::from_real(0.5, 0.5, 1.0).unwrap();
        let m = zoo::spin_coherent(0.5, 0.5, 1.0).unwrap();
        let th = [std::f64::consts::FRAC_PI_3, std::f64::consts::FRAC_PI_4];
        let f = horizontal_lift(&m, &th).unwrap();
        let TangentFrame::Pure { phi, lifts, .. } = &f else { panic!() };
        let s = super::fock::SpinMatrices::new(1, 1.0);
        let a = &s.sx * c(th[1].sin(), 0.0) - &s.sy * c(th[1].cos(), 0.0);
        let g = (a * phi) * c(0.0, 2.0);
        let projected = &g - phi * phi.dotc(&g);
        assert!((&lifts[0] - projected).norm() < 1e-10);
        // at θ¹ = 0 the projection is trivial for s = 1/2
        let f0 = horizontal_lift(&m, &[0.0, 0.3]).unwrap_err();
        assert!(matches!(f0, QestimError::RedundantParameters { .. }));
        assert!((fam.reference_beta() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spin_reference_values() {
        let th = [std::f64::consts::FRAC_PI_3, std::f64::consts::FRAC_PI_4];
        let m = zoo::spin_coherent(0.5, 0.5, 1.0).unwrap().with_tangent_mode(TangentMode::FiniteDifference);
        let g = info_geometry(&horizontal_lift(&m, &th).unwrap()).unwrap();
        assert!((g.js[(0, 0)] - 1.0).abs() < 1e-8);
        assert!((g.js[(1, 1)] - 0.75).abs() < 1e-8);
        assert!((g.jtilde[(0, 1)] - 2.0 * 0.5 * th[0].sin()).abs() < 1e-8);
        assert!(g.flags.coherent);
        let m = zoo::spin_coherent(1.0, 0.0, 1.0).unwrap();
        let g = info_geometry(&horizontal_lift(&m, &th).unwrap()).unwrap();
        assert!(g.flags.quasi_classical);
        assert!(g.beta_spectrum[0] < 1e-12);
    }

    #[test]
    fn analytic_tangents_agree_with_differences() {
        let cases: Vec<(ParametricModel, Vec<f64>)> = vec![
            (zoo::spin_coherent(1.5, 0.5, 1.0).unwrap(), vec![0.7, 1.1]),
            (zoo::spin_coherent(1.0, -1.0, 0.7).unwrap(), vec![0.4, -0.3]),
            (zoo::pm_shift_fock(2, 64, 1.0).unwrap(), vec![0.3, -0.2]),
            (zoo::canonical(vec![0.0, 0.4, 1.3], 1.0, 1.0).unwrap(), vec![0.8]),
            (zoo::synthetic_blocks(&[0.6]).unwrap(), vec![0.05, -0.02]),
        ];
        for (m, th) in cases {
            let d = analytic_tangent_discrepancy(&m, &th).unwrap().unwrap();
            assert!(d < 1e-6, "{} discrepancy {d}", m.kind());
        }
    }

    #[test]
    fn qubit_sld_closed_form() {
        let s = zoo::pauli_matrices();
        let half = c(0.5, 0.0);
        let theta = 0.3;
        let rho = (CMatrix::identity(2, 2) + &s[2] * c(theta, 0.0)) * half;
        let drho = &s[2] * half;
        let l = solve_sld(&rho, &drho, &Tolerances::default()).unwrap();
        let expect = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0 / (1.0 + theta), 0.0), c(-1.0 / (1.0 - theta), 0.0)]));
        assert!(max_abs(&(&l - expect)) < 1e-12);
        let rec = (&l * &rho + &rho * &l) * half;
        assert!(max_abs(&(rec - drho)) < 1e-12);
    }

    #[test]
    fn gibbs_sld_is_diagonal() {
        let m = zoo::canonical(vec![0.0, 1.0], 1.0, 1.0).unwrap();
        let f = sld_solve(&m, &[1.3]).unwrap();
        let TangentFrame::Faithful { slds, .. } = &f else { panic!() };
        assert!(slds[0][(0, 1)].norm() < 1e-14);
        assert!(f.reconstruction_residual(&tangents(&m, &[1.3]).unwrap()) < 1e-12);
    }

    #[test]
    fn pure_state_rejected_by_sld_solve() {
        let m = zoo::qubit_great_circle();
        assert!(matches!(sld_solve(&m, &[0.2]), Err(QestimError::NotFaithful { .. })));
        let rho = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        let m = zoo::explicit_mixed(rho, vec![zoo::pauli_matrices()[0].clone()], vec![0.0]).unwrap();
        assert!(matches!(sld_solve(&m, &[0.0]), Err(QestimError::NotFaithful { .. })));
    }

    #[test]
    fn canonical_two_level() {
        let m = zoo::canonical(vec![0.0, 1.0], 1.0, 1.0).unwrap();
        let g = info_geometry(&sld_solve(&m, &[1.0]).unwrap()).unwrap();
        let p = (-1.0f64).exp() / (1.0 + (-1.0f64).exp());
        assert!((g.js[(0, 0)] - p * (1.0 - p)).abs() < 1e-12);
        assert!((g.js[(0, 0)] - 0.19661).abs() < 1e-5);
        let fam = zoo::Canonical::new(vec![0.0, 1.0], 1.0).unwrap();
        let probs = fam.probabilities(1.0).unwrap();
        let est = fam.best_estimates(1.0).unwrap();
        let mean: f64 = probs.iter().zip(&est).map(|(p, e)| p * e).sum();
        assert!((mean - 1.0).abs() < 1e-14);
        let hot = info_geometry(&sld_solve(&m, &[1e4]).unwrap()).unwrap();
        assert!(hot.js[(0, 0)] < 1e-8);
        assert!(zoo::canonical(vec![0.0, 1.0], 1.0, 1.0).unwrap().state_at(&[0.0]).is_err());
    }

    #[test]
    fn rabi_time_evolution() {
        let omega = 1.7;
        let hbar = 0.8;
        let h = &zoo::pauli_matrices()[0] * c(hbar * omega / 2.0, 0.0);
        let psi = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let m = zoo::time_evolution(h, psi.clone(), hbar).unwrap();
        let g = info_geometry(&horizontal_lift(&m, &[0.37]).unwrap()).unwrap();
        assert!((g.js[(0, 0)] - omega * omega).abs() < 1e-10);
        let flat = zoo::time_evolution(CMatrix::identity(2, 2) * c(2.0, 0.0), psi, 1.0).unwrap();
        assert!(matches!(horizontal_lift(&flat, &[0.1]), Err(QestimError::RedundantParameters { .. })));
    }

    #[test]
    fn pm_shift_ground_state() {
        let m = zoo::pm_shift_fock(0, 64, 1.0).unwrap();
        let g = info_geometry(&horizontal_lift(&m, &[0.2, -0.1]).unwrap()).unwrap();
        assert!((g.js[(0, 0)] - 2.0).abs() < 1e-8 && (g.js[(1, 1)] - 2.0).abs() < 1e-8);
        assert!((g.beta_spectrum[0] - 1.0).abs() < 1e-8);
        let m = zoo::pm_shift_fock(1, 64, 1.0).unwrap();
        let g = info_geometry(&horizontal_lift(&m, &[0.0, 0.0]).unwrap()).unwrap();
        assert!((g.beta_spectrum[0] - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn truncation_leakage_reported() {
        let m = zoo::pm_shift_fock(0, 16, 1.0).unwrap();
        let e = m.state_at(&[6.0, 6.0]).unwrap_err();
        assert!(matches!(e, QestimError::Truncation { .. }));
    }

    #[test]
    fn zoo_reconstruction_residuals() {
        let cases: Vec<(ParametricModel, Vec<f64>)> = vec![
            (zoo::spin_coherent(1.0, 1.0, 1.0).unwrap(), vec![0.9, 0.2]),
            (zoo::squeezed(48, 1.0).unwrap(), vec![0.1, -0.2, 0.3, 0.4]),
            (zoo::pm_shift_fock(1, 48, 1.0).unwrap(), vec![0.1, 0.1]),
            (zoo::canonical(vec![0.0, 0.5, 2.0], 1.0, 1.0).unwrap(), vec![1.5]),
            (zoo::bloch_affine([0.1, 0.2, 0.3], vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap(), vec![0.05, 0.1]),
        ];
        for (m, th) in cases {
            let f = tangent_frame(&m, &th).unwrap();
            let r = f.reconstruction_residual(&tangents(&m, &th).unwrap());
            assert!(r < 1e-8, "{} residual {r}", m.kind());
        }
    }

    #[test]
    fn explicit_frame_validation() {
        let phi = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let bad = vec![CVector::from_vec(vec![c(0.1, 0.0), c(1.0, 0.0)])];
        assert!(TangentFrame::pure_from_lifts(vec![0.0], phi.clone(), bad, &Tolerances::default()).is_err());
        let good = vec![CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)])];
        assert!(TangentFrame::pure_from_lifts(vec![0.0], phi, good, &Tolerances::default()).is_ok());
    }
}
