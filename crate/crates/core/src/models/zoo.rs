//! Built-in parametric families.

use std::fmt;
use std::sync::Arc;

use super::fock::{annihilation, check_leakage, fock_state, quadratures, SpinMatrices};
use super::{ParametricModel, ReferenceGeometry, StateFamily, Tangent};
use crate::operators::{hermitian_eigendecomposition, matrix_exponential_skew, validated_hermitian, HermitianEigen, QuantumState};
use crate::{CMatrix, CVector, QestimError, RMatrix, Result, Tolerances, C64};

/// Largest Hilbert-space dimension accepted from user input.
pub const MAX_DIM: usize = 512;
/// Largest parameter count accepted from user input.
pub const MAX_PARAMS: usize = 32;

fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(QestimError::validation(format!("hbar must be positive and finite, got {hbar}")));
    }
    Ok(())
}

fn check_dim(n: usize, what: &str) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(QestimError::validation(format!("{what} must be in 1..={MAX_DIM}, got {n}")));
    }
    Ok(())
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

const I: C64 = C64 { re: 0.0, im: 1.0 };

// ---------------------------------------------------------------------------
// spin coherent

/// `φ(θ) = exp[iθ¹(sinθ² S_x − cosθ² S_y)]|s, m⟩`.
#[derive(Debug, Clone)]
pub struct SpinCoherent {
    spin: SpinMatrices,
    twice_m: i64,
    hbar: f64,
    base: CVector,
}

impl SpinCoherent {
    /// `s` and `m` are given doubled so half-integers are exact.
    pub fn new(twice_s: u32, twice_m: i64, hbar: f64) -> Result<Self> {
        check_hbar(hbar)?;
        if twice_s == 0 {
            return Err(QestimError::validation("spin s must be at least 1/2"));
        }
        check_dim(twice_s as usize + 1, "spin dimension 2s+1")?;
        let spin = SpinMatrices::new(twice_s, hbar);
        let idx = spin.index_of(twice_m).ok_or_else(|| {
            QestimError::validation(format!(
                "m = {} is not one of s, s-1, ..., -s for s = {}",
                twice_m as f64 / 2.0,
                twice_s as f64 / 2.0
            ))
        })?;
        let base = fock_state(spin.dim(), idx);
        Ok(SpinCoherent { spin, twice_m, hbar, base })
    }

    /// From real `s`, `m`; both must be multiples of 1/2.
    pub fn from_real(s: f64, m: f64, hbar: f64) -> Result<Self> {
        let ts = 2.0 * s;
        let tm = 2.0 * m;
        if !(ts.is_finite() && tm.is_finite()) || ts.fract() != 0.0 || tm.fract() != 0.0 || ts < 1.0 {
            return Err(QestimError::validation(format!("invalid spin (s, m) = ({s}, {m}); both must be half-integers, s >= 1/2")));
        }
        if ts > (MAX_DIM - 1) as f64 {
            return Err(QestimError::validation(format!("spin s = {s} exceeds the supported size")));
        }
        Self::new(ts as u32, tm as i64, hbar)
    }

    pub fn s(&self) -> f64 {
        self.spin.twice_s as f64 / 2.0
    }

    pub fn m(&self) -> f64 {
        self.twice_m as f64 / 2.0
    }

    /// `m / (s² + s − m²)`.
    pub fn reference_beta(&self) -> f64 {
        let (s, m) = (self.s(), self.m());
        m / (s * s + s - m * m)
    }

    fn generator(&self, theta2: f64) -> CMatrix {
        &self.spin.sx * re(theta2.sin()) - &self.spin.sy * re(theta2.cos())
    }
}

impl StateFamily for SpinCoherent {
    fn kind(&self) -> &'static str {
        "spin_coherent"
    }
    fn dim(&self) -> usize {
        self.spin.dim()
    }
    fn n_params(&self) -> usize {
        2
    }
    fn is_pure(&self) -> bool {
        true
    }

    fn state_at(&self, theta: &[f64], tol: &Tolerances) -> Result<QuantumState> {
        let u = matrix_exponential_skew(&self.generator(theta[1]), theta[0])?;
        QuantumState::pure_normalized(u * &self.base, tol)
    }

    fn analytic_tangents(&self, theta: &[f64], tol: &Tolerances) -> Option<Result<Vec<Tangent>>> {
        Some((|| {
            let a = self.generator(theta[1]);
            let phi = match self.state_at(theta, tol)? {
                QuantumState::Pure(v) => v,
                QuantumState::Mixed(_) => unreachable!(),
            };
            let d1 = (&a * &phi) * I;
            let n = self.dim();
            let gen2 = CMatrix::identity(n, n) * re(self.m()) - &self.spin.sz * re(1.0 / self.hbar);
            let d2 = (gen2 * &phi) * I;
            Ok(vec![Tangent::Vector(d1), Tangent::Vector(d2)])
        })())
    }

    fn reference_geometry(&self, theta: &[f64]) -> Option<ReferenceGeometry> {
        let (s, m, h) = (self.s(), self.m(), self.hbar);
        let c = 2.0 * (s * s + s - m * m);
        let sn = (h * theta[0]).sin();
        let js = RMatrix::from_row_slice(2, 2, &[c * h * h, 0.0, 0.0, c * sn * sn]);
        let j12 = 2.0 * m * h * sn;
        let jtilde = RMatrix::from_row_slice(2, 2, &[0.0, j12, -j12, 0.0]);
        Some(ReferenceGeometry { js, jtilde })
    }
}

pub fn spin_coherent(s: f64, m: f64, hbar: f64) -> Result<ParametricModel> {
    Ok(ParametricModel::new(SpinCoherent::from_real(s, m, hbar)?, hbar))
}

// ---------------------------------------------------------------------------
// squeezed

/// `|z, ξ⟩ = D(z)S(ξ)|0⟩` with `z = (θ¹ + iθ²)/√(2ℏ)` and `ξ = θ³e^{−2iθ⁴}`.
#[derive(Debug, Clone)]
pub struct Squeezed {
    n: usize,
    hbar: f64,
    a: CMatrix,
    a2: CMatrix,
}

pub const MIN_SQUEEZED_TRUNC: usize = 32;

impl Squeezed {
    pub fn new(trunc_dim: usize, hbar: f64) -> Result<Self> {
        check_hbar(hbar)?;
        check_dim(trunc_dim, "trunc_dim")?;
        if trunc_dim < MIN_SQUEEZED_TRUNC {
            return Err(QestimError::validation(format!("squeezed model needs trunc_dim >= {MIN_SQUEEZED_TRUNC}, got {trunc_dim}")));
        }
        let a = annihilation(trunc_dim);
        let a2 = &a * &a;
        Ok(Squeezed { n: trunc_dim, hbar, a, a2 })
    }

    /// Printed closed form of `J^S`.
    pub fn reference_js(&self, theta: &[f64]) -> RMatrix {
        let h = self.hbar;
        let (c, s) = ((2.0 * theta[2]).cosh(), (2.0 * theta[2]).sinh());
        let (c4, s4) = ((2.0 * theta[3]).cos(), (2.0 * theta[3]).sin());
        let k = 2.0 / h;
        RMatrix::from_row_slice(
            4,
            4,
            &[
                k * (c - s * c4),
                k * s * s4,
                0.0,
                0.0,
                k * s * s4,
                k * (c + s * c4),
                0.0,
                0.0,
                0.0,
                0.0,
                k * h,
                0.0,
                0.0,
                0.0,
                0.0,
                k * h * s * s,
            ],
        )
    }
}

impl StateFamily for Squeezed {
    fn kind(&self) -> &'static str {
        "squeezed"
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn n_params(&self) -> usize {
        4
    }
    fn is_pure(&self) -> bool {
        true
    }

    fn state_at(&self, theta: &[f64], tol: &Tolerances) -> Result<QuantumState> {
        let z = C64::new(theta[0], theta[1]) / (2.0 * self.hbar).sqrt();
        let xi = C64::from_polar(theta[2], -2.0 * theta[3]);
        let ad = self.a.adjoint();
        let ad2 = self.a2.adjoint();
        // exp(K) = exp(i·(−iK)) with −iK Hermitian for anti-Hermitian K
        let kd = &ad * z - &self.a * z.conj();
        let ks = (&ad2 * xi - &self.a2 * xi.conj()) * re(0.5);
        let hd = validated_hermitian(&(kd * (-I)), 1e-10)?;
        let hs = validated_hermitian(&(ks * (-I)), 1e-10)?;
        let vac = fock_state(self.n, 0);
        let sq = matrix_exponential_skew(&hs, 1.0)? * vac;
        check_leakage(&sq, tol.leakage)?;
        let v = matrix_exponential_skew(&hd, 1.0)? * sq;
        check_leakage(&v, tol.leakage)?;
        QuantumState::pure_normalized(v, tol)
    }

    fn reference_geometry(&self, theta: &[f64]) -> Option<ReferenceGeometry> {
        let js = self.reference_js(theta);
        let h = self.hbar;
        let s = (2.0 * theta[2]).sinh();
        // the (3,4) entry is the value consistent with |det J^S| = |det J̃|
        let mut jt = RMatrix::zeros(4, 4);
        jt[(0, 1)] = 2.0 / h;
        jt[(1, 0)] = -2.0 / h;
        jt[(2, 3)] = -2.0 * s;
        jt[(3, 2)] = 2.0 * s;
        Some(ReferenceGeometry { js, jtilde: jt })
    }
}

pub fn squeezed(trunc_dim: usize, hbar: f64) -> Result<ParametricModel> {
    Ok(ParametricModel::new(Squeezed::new(trunc_dim, hbar)?, hbar).with_tangent_mode(super::TangentMode::FiniteDifference))
}

// ---------------------------------------------------------------------------
// position-momentum shift

/// `φ(x₀, p₀) = exp[(i/ℏ)(p₀X − x₀P)]|φ₀⟩`.
#[derive(Debug, Clone)]
pub struct PmShift {
    n: usize,
    hbar: f64,
    x: CMatrix,
    p: CMatrix,
    phi0: CVector,
    fock_index: Option<usize>,
}

impl PmShift {
    pub fn fock(n_level: usize, trunc_dim: usize, hbar: f64) -> Result<Self> {
        check_dim(trunc_dim, "trunc_dim")?;
        if n_level + 2 >= trunc_dim {
            return Err(QestimError::validation(format!("Fock index {n_level} needs trunc_dim > {}", n_level + 2)));
        }
        let mut s = Self::vector(fock_state(trunc_dim, n_level), hbar)?;
        s.fock_index = Some(n_level);
        Ok(s)
    }

    pub fn vector(phi0: CVector, hbar: f64) -> Result<Self> {
        check_hbar(hbar)?;
        let n = phi0.len();
        check_dim(n, "trunc_dim")?;
        let phi0 = match QuantumState::pure_normalized(phi0, &Tolerances::default())? {
            QuantumState::Pure(v) => v,
            QuantumState::Mixed(_) => unreachable!(),
        };
        let (x, p) = quadratures(n, hbar);
        Ok(PmShift { n, hbar, x, p, phi0, fock_index: None })
    }

    /// `4(n+½)/ℏ` for a Fock-state base.
    pub fn reference_js_diagonal(&self) -> Option<f64> {
        self.fock_index.map(|n| 4.0 * (n as f64 + 0.5) / self.hbar)
    }

    fn displacement(&self, theta: &[f64]) -> Result<CMatrix> {
        let gen = &self.x * re(theta[1]) - &self.p * re(theta[0]);
        matrix_exponential_skew(&gen, 1.0 / self.hbar)
    }
}

impl StateFamily for PmShift {
    fn kind(&self) -> &'static str {
        "pm_shift"
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn n_params(&self) -> usize {
        2
    }
    fn is_pure(&self) -> bool {
        true
    }

    fn state_at(&self, theta: &[f64], tol: &Tolerances) -> Result<QuantumState> {
        let v = self.displacement(theta)? * &self.phi0;
        check_leakage(&v, tol.leakage)?;
        QuantumState::pure_normalized(v, tol)
    }

    fn analytic_tangents(&self, theta: &[f64], tol: &Tolerances) -> Option<Result<Vec<Tangent>>> {
        Some((|| {
            let d = self.displacement(theta)?;
            check_leakage(&(&d * &self.phi0), tol.leakage)?;
            let n = self.n;
            let id = CMatrix::identity(n, n);
            let gx = (&self.p + &id * re(theta[1] / 2.0)) * C64::new(0.0, -1.0 / self.hbar);
            let gp = (&self.x + &id * re(theta[0] / 2.0)) * C64::new(0.0, 1.0 / self.hbar);
            Ok(vec![Tangent::Vector(&d * (gx * &self.phi0)), Tangent::Vector(&d * (gp * &self.phi0))])
        })())
    }

    fn reference_geometry(&self, _theta: &[f64]) -> Option<ReferenceGeometry> {
        let j = self.reference_js_diagonal()?;
        let js = RMatrix::from_diagonal_element(2, 2, j);
        let t = 2.0 / self.hbar;
        let jtilde = RMatrix::from_row_slice(2, 2, &[0.0, t, -t, 0.0]);
        Some(ReferenceGeometry { js, jtilde })
    }
}

pub fn pm_shift_fock(n_level: usize, trunc_dim: usize, hbar: f64) -> Result<ParametricModel> {
    Ok(ParametricModel::new(PmShift::fock(n_level, trunc_dim, hbar)?, hbar))
}

pub fn pm_shift_vector(phi0: CVector, hbar: f64) -> Result<ParametricModel> {
    Ok(ParametricModel::new(PmShift::vector(phi0, hbar)?, hbar))
}

// ---------------------------------------------------------------------------
// canonical

/// `ρ(T) = diag(e^{−E_ω/k_BT})/Z`.
#[derive(Debug, Clone)]
pub struct Canonical {
    energies: Vec<f64>,
    k_b: f64,
}

impl Canonical {
    pub fn new(energies: Vec<f64>, k_b: f64) -> Result<Self> {
        check_dim(energies.len(), "number of energy levels")?;
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(QestimError::validation("energies must be finite"));
        }
        if !(k_b > 0.0 && k_b.is_finite()) {
            return Err(QestimError::validation(format!("k_b must be positive, got {k_b}")));
        }
        Ok(Canonical { energies, k_b })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn k_b(&self) -> f64 {
        self.k_b
    }

    fn check_t(t: f64) -> Result<()> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(QestimError::validation(format!("temperature must be positive, got {t}")));
        }
        Ok(())
    }

    /// Gibbs weights at temperature `t`.
    pub fn probabilities(&self, t: f64) -> Result<Vec<f64>> {
        Self::check_t(t)?;
        let e0 = self.energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = self.energies.iter().map(|e| (-(e - e0) / (self.k_b * t)).exp()).collect();
        let z: f64 = w.iter().sum();
        Ok(w.into_iter().map(|x| x / z).collect())
    }

    pub fn mean_energy(&self, t: f64) -> Result<f64> {
        Ok(self.probabilities(t)?.iter().zip(&self.energies).map(|(p, e)| p * e).sum())
    }

    pub fn energy_variance(&self, t: f64) -> Result<f64> {
        let p = self.probabilities(t)?;
        let mean: f64 = p.iter().zip(&self.energies).map(|(p, e)| p * e).sum();
        Ok(p.iter().zip(&self.energies).map(|(p, e)| p * (e - mean) * (e - mean)).sum())
    }

    /// `C(T) = Var(H)/(k_B T²)`.
    pub fn heat_capacity(&self, t: f64) -> Result<f64> {
        Ok(self.energy_variance(t)? / (self.k_b * t * t))
    }

    /// `C(T)/(k_B T²)`.
    pub fn reference_js(&self, t: f64) -> Result<f64> {
        Ok(self.heat_capacity(t)? / (self.k_b * t * t))
    }

    /// `θ̂(ω) = T + (E_ω − ⟨H⟩)/C(T)`.
    pub fn best_estimates(&self, t: f64) -> Result<Vec<f64>> {
        let mean = self.mean_energy(t)?;
        let c = self.heat_capacity(t)?;
        if c <= 0.0 {
            return Err(QestimError::Precondition("heat capacity vanishes; temperature is not identifiable".into()));
        }
        Ok(self.energies.iter().map(|e| t + (e - mean) / c).collect())
    }
}

impl StateFamily for Canonical {
    fn kind(&self) -> &'static str {
        "canonical"
    }
    fn dim(&self) -> usize {
        self.energies.len()
    }
    fn n_params(&self) -> usize {
        1
    }
    fn is_pure(&self) -> bool {
        false
    }

    fn state_at(&self, theta: &[f64], tol: &Tolerances) -> Result<QuantumState> {
        let p = self.probabilities(theta[0])?;
        let rho = CMatrix::from_diagonal(&CVector::from_iterator(p.len(), p.into_iter().map(re)));
        QuantumState::mixed(rho, tol)
    }

    fn analytic_tangents(&self, theta: &[f64], _tol: &Tolerances) -> Option<Result<Vec<Tangent>>> {
        Some((|| {
            let t = theta[0];
            let p = self.probabilities(t)?;
            let mean: f64 = p.iter().zip(&self.energies).map(|(p, e)| p * e).sum();
            let k = self.k_b * t * t;
            let d = CVector::from_iterator(p.len(), p.iter().zip(&self.energies).map(|(p, e)| re(p * (e - mean) / k)));
            Ok(vec![Tangent::Matrix(CMatrix::from_diagonal(&d))])
        })())
    }

    fn reference_geometry(&self, theta: &[f64]) -> Option<ReferenceGeometry> {
        let j = self.reference_js(theta[0]).ok()?;
        Some(ReferenceGeometry { js: RMatrix::from_element(1, 1, j), jtilde: RMatrix::zeros(1, 1) })
    }
}

pub fn canonical(energies: Vec<f64>, k_b: f64, hbar: f64) -> Result<ParametricModel> {
    check_hbar(hbar)?;
    Ok(ParametricModel::new(Canonical::new(energies, k_b)?, hbar))
}

// ---------------------------------------------------------------------------
// time evolution

/// `φ(t) = exp(−iHt/ℏ)ψ₀`.
#[derive(Debug, Clone)]
pub struct TimeEvolution {
    h: CMatrix,
    eig: HermitianEigen,
    psi0: CVector,
    hbar: f64,
}

impl TimeEvolution {
    pub fn new(h: CMatrix, psi0: CVector, hbar: f64) -> Result<Self> {
        check_hbar(hbar)?;
        check_dim(h.nrows(), "Hamiltonian dimension")?;
        let h = validated_hermitian(&h, Tolerances::default().hermitian)?;
        if psi0.len() != h.nrows() {
            return Err(QestimError::validation(format!(
                "psi0 has dimension {}, Hamiltonian has {}",
                psi0.len(),
                h.nrows()
            )));
        }
        let psi0 = match QuantumState::pure(psi0, &Tolerances::default())? {
            QuantumState::Pure(v) => v,
            QuantumState::Mixed(_) => unreachable!(),
        };
        let eig = hermitian_eigendecomposition(&h)?;
        Ok(TimeEvolution { h, eig, psi0, hbar })
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.h
    }

    pub fn psi0(&self) -> &CVector {
        &self.psi0
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `U(t) = exp(−iHt/ℏ)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let s = -t / self.hbar;
        self.eig.map(|l| C64::from_polar(1.0, s * l))
    }

    /// `⟨ΔH²⟩` in `ψ₀`.
    pub fn energy_variance(&self) -> f64 {
        let hv = &self.h * &self.psi0;
        let mean = self.psi0.dotc(&hv).re;
        (hv.norm_squared() - mean * mean).max(0.0)
    }

    /// `4⟨ΔH²⟩/ℏ²`.
    pub fn reference_js(&self) -> f64 {
        4.0 * self.energy_variance() / (self.hbar * self.hbar)
    }
}

impl StateFamily for TimeEvolution {
    fn kind(&self) -> &'static str {
        "time_evolution"
    }
    fn dim(&self) -> usize {
        self.psi0.len()
    }
    fn n_params(&self) -> usize {
        1
    }
    fn is_pure(&self) -> bool {
        true
    }

    fn state_at(&self, theta: &[f64], tol: &Tolerances) -> Result<QuantumState> {
        QuantumState::pure_normalized(self.propagator(theta[0]) * &self.psi0, tol)
    }

    fn analytic_tangents(&self, theta: &[f64], _tol: &Tolerances) -> Option<Result<Vec<Tangent>>> {
        let phi = self.propagator(theta[0]) * &self.psi0;
        Some(Ok(vec![Tangent::Vector((&self.h * phi) * C64::new(0.0, -1.0 / self.hbar))]))
    }

    fn reference_geometry(&self, _theta: &[f64]) -> Option<ReferenceGeometry> {
        Some(ReferenceGeometry { js: RMatrix::from_element(1, 1, self.reference_js()), jtilde: RMatrix::zeros(1, 1) })
    }
}

pub fn time_evolution(h: CMatrix, psi0: CVector, hbar: f64) -> Result<ParametricModel> {
    Ok(ParametricModel::new(TimeEvolution::new(h, psi0, hbar)?, hbar))
}

// ---------------------------------------------------------------------------
// explicit

/// A pure model given by its state and tangent vectors at one point,
/// extended to `normalize(φ₀ + Σ(θ−θ₀)_i t_i)`.
#[derive(Debug, Clone)]
pub struct ExplicitPure {
    phi0: CVector,
    tangents: Vec<CVector>,
    theta0: Vec<f64>,
}

impl ExplicitPure {
    pub fn new(phi0: CVector, tangents: Vec<CVector>, theta0: Vec<f64>) -> Result<Self> {
        check_dim(phi0.len(), "state dimension")?;
        if tangents.is_empty() || tangents.len() > MAX_PARAMS {
            return Err(QestimError::validation(format!("need 1..={MAX_PARAMS} tangent vectors, got {}", tangents.len())));
        }
        if tangents.len() != theta0.len() {
            return Err(QestimError::validation(format!(
                "{} tangent vectors but theta has {} components",
                tangents.len(),
                theta0.len()
            )));
        }
        if tangents.iter().any(|t| t.len() != phi0.len()) {
            return Err(QestimError::validation("tangent vector dimension does not match the state"));
        }
        if tangents.iter().any(|t| t.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(QestimError::validation("tangent vectors have non-finite entries"));
        }
        QuantumState::pure(phi0.clone(), &Tolerances::default())?;
        Ok(ExplicitPure { phi0, tangents, theta0 })
    }

    fn raw(&self, theta: &[f64]) -> CVector {
        let mut v = self.phi0.clone();
        for ((t, x), x0) in self.tangents.iter().zip(theta).zip(&self.theta0) {
            v += t * re(x - x0);
        }
        v
    }
}

impl StateFamily for ExplicitPure {
    fn kind(&self) -> &'static str {
        "explicit"
    }
    fn dim(&self) -> usize {
        self.phi0.len()
    }
    fn n_params(&self) -> usize {
        self.tangents.len()
    }
    fn is_pure(&self) -> bool {
        true
    }

    fn state_at(&self, theta: &[f64], tol: &Tolerances) -> Result<QuantumState> {
        QuantumState::pure_normalized(self.raw(theta), tol)
    }

    fn analytic_tangents(&self, theta: &[f64], _tol: &Tolerances) -> Option<Result<Vec<Tangent>>> {
        let v = self.raw(theta);
        let n = v.norm();
        if n <= 0.0 {
            return Some(Err(QestimError::validation("explicit model vanishes at theta")));
        }
        Some(Ok(self
            .tangents
            .iter()
            .map(|t| {
                let r = v.dotc(t).re;
                Tangent::Vector(t * re(1.0 / n) - &v * re(r / (n * n * n)))
            })
            .collect()))
    }
}

/// A mixed model `ρ₀ + Σ(θ−θ₀)_i ∂_iρ`.
#[derive(Debug, Clone)]
pub struct ExplicitMixed {
    rho0: CMatrix,
    derivatives: Vec<CMatrix>,
    theta0: Vec<f64>,
}

impl ExplicitMixed {
    pub fn new(rho0: CMatrix, derivatives: Vec<CMatrix>, theta0: Vec<f64>) -> Result<Self> {
        check_dim(rho0.nrows(), "density dimension")?;
        let tol = Tolerances::default();
        let rho0 = QuantumState::mixed(rho0, &tol)?.density();
        if derivatives.is_empty() || derivatives.len() > MAX_PARAMS {
            return Err(QestimError::validation(format!("need 1..={MAX_PARAMS} derivatives, got {}", derivatives.len())));
        }
        if derivatives.len() != theta0.len() {
            return Err(QestimError::validation("number of derivatives does not match theta"));
        }
        let mut ds = Vec::with_capacity(derivatives.len());
        for d in derivatives {
            if d.nrows() != rho0.nrows() || d.ncols() != rho0.ncols() {
                return Err(QestimError::validation("derivative dimension does not match the density"));
            }
            let d = validated_hermitian(&d, 1e-10)?;
            let tr = d.trace().re;
            if tr.abs() > 1e-10 * crate::operators::max_abs(&d).max(1.0) {
                return Err(QestimError::validation(format!("derivative has nonzero trace {tr:.3e}")));
            }
            ds.push(d);
        }
        Ok(ExplicitMixed { rho0, derivatives: ds, theta0 })
    }
}

impl StateFamily for ExplicitMixed {
    fn kind(&self) -> &'static str {
        "explicit"
    }
    fn dim(&self) -> usize {
        self.rho0.nrows()
    }
    fn n_params(&self) -> usize {
        self.derivatives.len()
    }
    fn is_pure(&self) -> bool {
        false
    }

    fn state_at(&self, theta: &[f64], tol: &Tolerances) -> Result<QuantumState> {
        let mut r = self.rho0.clone();
        for ((d, x), x0) in self.derivatives.iter().zip(theta).zip(&self.theta0) {
            r += d * re(x - x0);
        }
        QuantumState::mixed(r, tol)
    }

    fn analytic_tangents(&self, _theta: &[f64], _tol: &Tolerances) -> Option<Result<Vec<Tangent>>> {
        Some(Ok(self.derivatives.iter().cloned().map(Tangent::Matrix).collect()))
    }
}

pub fn explicit_pure(phi0: CVector, tangents: Vec<CVector>, theta0: Vec<f64>) -> Result<ParametricModel> {
    Ok(ParametricModel::new(ExplicitPure::new(phi0, tangents, theta0)?, 1.0))
}

pub fn explicit_mixed(rho0: CMatrix, derivatives: Vec<CMatrix>, theta0: Vec<f64>) -> Result<ParametricModel> {
    Ok(ParametricModel::new(ExplicitMixed::new(rho0, derivatives, theta0)?, 1.0))
}

/// Pure model at `θ = 0` with `J^S = I` and `J̃` made of 2×2 blocks with the
/// given `β`s, in dimension `2k + 1`.
pub fn synthetic_blocks(betas: &[f64]) -> Result<ParametricModel> {
    if betas.is_empty() || betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(QestimError::validation("betas must be a nonempty list in [0, 1]"));
    }
    let k = betas.len();
    let d = 2 * k + 1;
    let phi0 = fock_state(d, 0);
    let mut tangents = Vec::with_capacity(2 * k);
    for (b, &beta) in betas.iter().enumerate() {
        let e1 = fock_state(d, 2 * b + 1);
        let e2 = fock_state(d, 2 * b + 2);
        tangents.push(&e1 * re(0.5));
        tangents.push((&e1 * C64::new(0.0, beta) + &e2 * re((1.0 - beta * beta).max(0.0).sqrt())) * re(0.5));
    }
    explicit_pure(phi0, tangents, vec![0.0; 2 * k])
}

// ---------------------------------------------------------------------------
// test families

/// `(cos θ¹, sin θ¹ cos θ², sin θ¹ sin θ² cos θ³, …)`: every amplitude real.
#[derive(Debug, Clone)]
pub struct RealAmplitude {
    m: usize,
}

impl StateFamily for RealAmplitude {
    fn kind(&self) -> &'static str {
        "real_amplitude"
    }
    fn dim(&self) -> usize {
        self.m + 1
    }
    fn n_params(&self) -> usize {
        self.m
    }
    fn is_pure(&self) -> bool {
        true
    }

    fn state_at(&self, theta: &[f64], tol: &Tolerances) -> Result<QuantumState> {
        let mut v = CVector::zeros(self.m + 1);
        let mut prod = 1.0;
        for (k, t) in theta.iter().enumerate() {
            v[k] = re(prod * t.cos());
            prod *= t.sin();
        }
        v[self.m] = re(prod);
        QuantumState::pure_normalized(v, tol)
    }
}

pub fn real_amplitude(m: usize) -> Result<ParametricModel> {
    if m == 0 || m > MAX_PARAMS {
        return Err(QestimError::validation("real_amplitude needs 1..=32 parameters"));
    }
    Ok(ParametricModel::new(RealAmplitude { m }, 1.0).with_tangent_mode(super::TangentMode::FiniteDifference))
}

/// Qubit `ρ = ½(I + r·σ)` with `r(θ) = r₀ + Σθ_i a_i`.
#[derive(Debug, Clone)]
pub struct BlochAffine {
    r0: [f64; 3],
    dirs: Vec<[f64; 3]>,
}

fn pauli() -> [CMatrix; 3] {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        CMatrix::from_row_slice(2, 2, &[z, -I, I, z]),
        CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

fn bloch_matrix(r: &[f64; 3], with_identity: bool) -> CMatrix {
    let s = pauli();
    let mut m = if with_identity { CMatrix::identity(2, 2) } else { CMatrix::zeros(2, 2) };
    for k in 0..3 {
        m += &s[k] * re(r[k]);
    }
    m * re(0.5)
}

impl BlochAffine {
    pub fn new(r0: [f64; 3], dirs: Vec<[f64; 3]>) -> Result<Self> {
        let n: f64 = r0.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n >= 1.0 || dirs.is_empty() {
            return Err(QestimError::validation("Bloch vector must lie strictly inside the unit ball"));
        }
        Ok(BlochAffine { r0, dirs })
    }
}

impl StateFamily for BlochAffine {
    fn kind(&self) -> &'static str {
        "bloch_affine"
    }
    fn dim(&self) -> usize {
        2
    }
    fn n_params(&self) -> usize {
        self.dirs.len()
    }
    fn is_pure(&self) -> bool {
        false
    }

    fn state_at(&self, theta: &[f64], tol: &Tolerances) -> Result<QuantumState> {
        let mut r = self.r0;
        for (d, t) in self.dirs.iter().zip(theta) {
            for k in 0..3 {
                r[k] += t * d[k];
            }
        }
        QuantumState::mixed(bloch_matrix(&r, true), tol)
    }

    fn analytic_tangents(&self, _theta: &[f64], _tol: &Tolerances) -> Option<Result<Vec<Tangent>>> {
        Some(Ok(self.dirs.iter().map(|d| Tangent::Matrix(bloch_matrix(d, false))).collect()))
    }
}

pub fn bloch_affine(r0: [f64; 3], dirs: Vec<[f64; 3]>) -> Result<ParametricModel> {
    Ok(ParametricModel::new(BlochAffine::new(r0, dirs)?, 1.0))
}

/// `ρ(θ) = U(θ)ρ₀U(θ)†` with `U(θ) = exp(−iΣθ_k H_k)`.
#[derive(Debug, Clone)]
pub struct UnitaryOrbit {
    rho0: CMatrix,
    generators: Vec<CMatrix>,
}

impl UnitaryOrbit {
    pub fn new(rho0: CMatrix, generators: Vec<CMatrix>) -> Result<Self> {
        let rho0 = QuantumState::mixed(rho0, &Tolerances::default())?.density();
        let generators = generators.iter().map(|h| validated_hermitian(h, 1e-10)).collect::<Result<Vec<_>>>()?;
        if generators.is_empty() || generators.iter().any(|h| h.nrows() != rho0.nrows()) {
            return Err(QestimError::validation("generators must match the state dimension"));
        }
        Ok(UnitaryOrbit { rho0, generators })
    }
}

impl StateFamily for UnitaryOrbit {
    fn kind(&self) -> &'static str {
        "unitary_orbit"
    }
    fn dim(&self) -> usize {
        self.rho0.nrows()
    }
    fn n_params(&self) -> usize {
        self.generators.len()
    }
    fn is_pure(&self) -> bool {
        false
    }

    fn state_at(&self, theta: &[f64], tol: &Tolerances) -> Result<QuantumState> {
        let n = self.dim();
        let mut h = CMatrix::zeros(n, n);
        for (g, t) in self.generators.iter().zip(theta) {
            h += g * re(*t);
        }
        let u = matrix_exponential_skew(&h, -1.0)?;
        QuantumState::mixed(&u * &self.rho0 * u.adjoint(), tol)
    }
}

pub fn unitary_orbit(rho0: CMatrix, generators: Vec<CMatrix>) -> Result<ParametricModel> {
    Ok(ParametricModel::new(UnitaryOrbit::new(rho0, generators)?, 1.0).with_tangent_mode(super::TangentMode::FiniteDifference))
}

/// A pure family defined by a closure.
pub struct FnFamily {
    name: &'static str,
    dim: usize,
    m: usize,
    f: Arc<dyn Fn(&[f64]) -> CVector + Send + Sync>,
}

impl fmt::Debug for FnFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnFamily").field("name", &self.name).field("dim", &self.dim).field("m", &self.m).finish()
    }
}

impl StateFamily for FnFamily {
    fn kind(&self) -> &'static str {
        self.name
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn n_params(&self) -> usize {
        self.m
    }
    fn is_pure(&self) -> bool {
        true
    }

    fn state_at(&self, theta: &[f64], tol: &Tolerances) -> Result<QuantumState> {
        let v = (self.f)(theta);
        if v.len() != self.dim {
            return Err(QestimError::validation("closure returned a vector of the wrong dimension"));
        }
        QuantumState::pure_normalized(v, tol)
    }
}

pub fn from_fn(
    name: &'static str,
    dim: usize,
    m: usize,
    f: impl Fn(&[f64]) -> CVector + Send + Sync + 'static,
) -> ParametricModel {
    ParametricModel::new(FnFamily { name, dim, m, f: Arc::new(f) }, 1.0)
}

/// The qubit great circle `(cos θ/2, sin θ/2)`.
pub fn qubit_great_circle() -> ParametricModel {
    from_fn("qubit_great_circle", 2, 1, |t| CVector::from_vec(vec![re((t[0] / 2.0).cos()), re((t[0] / 2.0).sin())]))
}

pub fn pauli_matrices() -> [CMatrix; 3] {
    pauli()
}
