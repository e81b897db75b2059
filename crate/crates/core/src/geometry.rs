//! Metric quantities at a point: `J^S`, `J̃`, the β-spectrum, curvature and
//! parallel transport.

use serde::{Deserialize, Serialize};

use crate::models::{sld_solve, tangents, ParametricModel, Tangent, TangentFrame};
use crate::operators::{
    commutator, hermitian_eigendecomposition, max_abs, max_abs_real, psd_sqrt, real_symmetric_eigen,
    real_symmetric_map, spd_inverse, to_complex,
};
use crate::{CMatrix, QestimError, RMatrix, Result, Tolerances, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub quasi_classical: bool,
    pub coherent: bool,
}

/// Residual accepted when pairing `±β` eigenvalues.
pub const BETA_PAIR_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct InfoGeometry {
    pub js: RMatrix,
    pub jtilde: RMatrix,
    /// One `β_k` per `±iβ_k` pair, descending.
    pub beta_spectrum: Vec<f64>,
    /// Number of unpaired zero eigenvalues (odd `m`).
    pub zero_modes: usize,
    pub flags: Flags,
    pub pure: bool,
}

impl InfoGeometry {
    pub fn m(&self) -> usize {
        self.js.nrows()
    }

    /// Moduli of all `m` eigenvalues of `J^{S−1}J̃`, descending.
    pub fn alpha_moduli(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.beta_spectrum.iter().flat_map(|&b| [b, b]).collect();
        out.extend(std::iter::repeat_n(0.0, self.zero_modes));
        out
    }

    pub fn js_inverse(&self) -> Result<RMatrix> {
        spd_inverse(&self.js).ok_or(QestimError::RedundantParameters { rank: self.m().saturating_sub(1), params: self.m() })
    }

    /// `J^{S−1/2}`.
    pub fn js_inv_sqrt(&self) -> RMatrix {
        real_symmetric_map(&self.js, |l| 1.0 / l.sqrt())
    }

    pub fn js_sqrt(&self) -> RMatrix {
        real_symmetric_map(&self.js, |l| l.max(0.0).sqrt())
    }

    /// `J^{S−1/2} J̃ J^{S−1/2}`, antisymmetrized.
    pub fn normalized_jtilde(&self) -> RMatrix {
        let s = self.js_inv_sqrt();
        let a = &s * &self.jtilde * &s;
        (&a - a.transpose()) * 0.5
    }

    pub fn det_js(&self) -> f64 {
        self.js.determinant().abs()
    }

    pub fn det_jtilde(&self) -> f64 {
        self.jtilde.determinant().abs()
    }
}

/// Builds the geometry from explicit `J^S` and `J̃`.
pub fn geometry_from_matrices(js: RMatrix, jtilde: RMatrix, pure: bool, tol: &Tolerances) -> Result<InfoGeometry> {
    let m = js.nrows();
    if m == 0 || !js.is_square() || jtilde.shape() != js.shape() {
        return Err(QestimError::validation("J^S and J̃ must be square matrices of the same size"));
    }
    if js.iter().chain(jtilde.iter()).any(|x| !x.is_finite()) {
        return Err(QestimError::validation("metric has non-finite entries"));
    }
    let scale = max_abs_real(&js).max(f64::MIN_POSITIVE);
    let asym = max_abs_real(&(&js - js.transpose()));
    if asym > 1e-10 * scale {
        return Err(QestimError::validation(format!("J^S is not symmetric ({asym:.3e})")));
    }
    let sym = max_abs_real(&(&jtilde + jtilde.transpose()));
    if sym > 1e-10 * scale {
        return Err(QestimError::validation(format!("J̃ is not antisymmetric ({sym:.3e})")));
    }
    let js = (&js + js.transpose()) * 0.5;
    let jtilde = (&jtilde - jtilde.transpose()) * 0.5;
    let (vals, _) = real_symmetric_eigen(&js);
    let max = vals.last().copied().unwrap_or(0.0);
    let rank = vals.iter().filter(|&&v| v > tol.rank * max).count();
    if max <= 0.0 || rank < m {
        return Err(QestimError::RedundantParameters { rank: if max > 0.0 { rank } else { 0 }, params: m });
    }

    let mut g = InfoGeometry {
        js,
        jtilde,
        beta_spectrum: vec![],
        zero_modes: 0,
        flags: Flags { quasi_classical: false, coherent: false },
        pure,
    };
    let (betas, zero_modes) = beta_pairs(&g.normalized_jtilde())?;
    if let Some(&b) = betas.first() {
        if b > 1.0 + BETA_PAIR_TOL {
            return Err(QestimError::internal(format!("β = {b} exceeds 1")));
        }
    }
    let quasi = max_abs_real(&g.jtilde) <= tol.quasi_classical * max_abs_real(&g.js);
    let coherent = m.is_multiple_of(2) && zero_modes == 0 && betas.iter().all(|b| (b - 1.0).abs() <= tol.coherent);
    g.beta_spectrum = betas;
    g.zero_modes = zero_modes;
    g.flags = Flags { quasi_classical: quasi, coherent };
    Ok(g)
}

/// β values of a real antisymmetric matrix (already normalized) and the
/// count of unpaired zero modes.
pub fn beta_pairs(a: &RMatrix) -> Result<(Vec<f64>, usize)> {
    let m = a.nrows();
    let h = to_complex(a) * C64::new(0.0, 1.0);
    let eig = hermitian_eigendecomposition(&h)?;
    let lam = eig.values;
    let scale = lam.iter().fold(1.0f64, |s, x| s.max(x.abs()));
    let mut betas = Vec::with_capacity(m / 2);
    for k in 0..m / 2 {
        let (lo, hi) = (lam[k], lam[m - 1 - k]);
        let resid = (lo + hi).abs();
        if resid > BETA_PAIR_TOL * scale {
            return Err(QestimError::internal(format!("eigenvalues {lo} and {hi} of iJ̃ do not pair (residual {resid:.3e})")));
        }
        betas.push(((hi - lo) / 2.0).max(0.0));
    }
    if m % 2 == 1 {
        let mid = lam[m / 2];
        if mid.abs() > BETA_PAIR_TOL * scale {
            return Err(QestimError::internal(format!("unpaired eigenvalue {mid} of iJ̃ is not zero")));
        }
    }
    betas.sort_by(|x, y| y.total_cmp(x));
    Ok((betas, m % 2))
}

/// `J^S` and `J̃` of a tangent frame.
pub fn metric_matrices(frame: &TangentFrame) -> (RMatrix, RMatrix) {
    let m = frame.n_params();
    let mut js = RMatrix::zeros(m, m);
    let mut jt = RMatrix::zeros(m, m);
    match frame {
        TangentFrame::Pure { lifts, .. } => {
            for i in 0..m {
                for j in 0..m {
                    let z = lifts[i].dotc(&lifts[j]);
                    js[(i, j)] = z.re;
                    jt[(i, j)] = z.im;
                }
            }
        }
        TangentFrame::Faithful { rho, slds, .. } => {
            let rl: Vec<CMatrix> = slds.iter().map(|l| rho * l).collect();
            for i in 0..m {
                for j in 0..m {
                    let z = (&rl[i] * &slds[j]).trace();
                    js[(i, j)] = z.re;
                    jt[(i, j)] = z.im;
                }
            }
        }
    }
    (js, jt)
}

pub fn info_geometry(frame: &TangentFrame) -> Result<InfoGeometry> {
    info_geometry_with(frame, &Tolerances::default())
}

pub fn info_geometry_with(frame: &TangentFrame, tol: &Tolerances) -> Result<InfoGeometry> {
    let (js, jt) = metric_matrices(frame);
    geometry_from_matrices(js, jt, frame.is_pure(), tol)
}

/// Determinant form of the coherency test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetCheck {
    pub coherent: bool,
    pub det_js: f64,
    pub det_jtilde: f64,
    pub note: Option<String>,
}

pub const DET_CHECK_TOL: f64 = 1e-6;

pub fn coherency_det_check(geom: &InfoGeometry) -> DetCheck {
    let det_js = geom.det_js();
    let det_jtilde = geom.det_jtilde();
    if geom.m() % 2 == 1 {
        return DetCheck {
            coherent: false,
            det_js,
            det_jtilde,
            note: Some("odd number of parameters; coherent models have an even number".into()),
        };
    }
    let coherent = (det_js - det_jtilde).abs() <= DET_CHECK_TOL * det_js;
    DetCheck { coherent, det_js, det_jtilde, note: None }
}

// ---------------------------------------------------------------------------
// direct-sum decomposition

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// Indices of the block coordinates `η`.
    pub coords: Vec<usize>,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct DirectSum {
    /// `O`: orthogonal, columns span the blocks in normalized coordinates.
    pub rotation: RMatrix,
    /// `η = to_block · θ`, equal to `Oᵀ J^{S 1/2}`.
    pub to_block: RMatrix,
    /// `θ = from_block · η`, equal to `J^{S −1/2} O`.
    pub from_block: RMatrix,
    pub blocks: Vec<Block>,
    /// `J̃` in block coordinates.
    pub canonical: RMatrix,
}

/// Threshold below which a block is treated as quasi-classical.
const ZERO_BETA: f64 = 1e-12;

pub fn decompose_direct_sum(geom: &InfoGeometry) -> Result<DirectSum> {
    let m = geom.m();
    let a = geom.normalized_jtilde();
    let s = a.transpose() * &a;
    let (vals, vecs) = real_symmetric_eigen(&s);
    let mut basis: Vec<crate::RVector> = Vec::with_capacity(m);
    let mut blocks = Vec::new();
    let mut zero_dirs: Vec<crate::RVector> = Vec::new();
    for k in (0..m).rev() {
        if basis.len() + zero_dirs.len() >= m {
            break;
        }
        let mut u = vecs.column(k).into_owned();
        for b in basis.iter().chain(&zero_dirs) {
            let c = b.dot(&u);
            u -= b * c;
        }
        let n = u.norm();
        if n < 1e-4 {
            continue;
        }
        u /= n;
        let au = &a * &u;
        let beta = au.norm();
        if vals[k].max(0.0).sqrt() > ZERO_BETA && beta > ZERO_BETA {
            let mut v = au / beta;
            for b in basis.iter().chain(&zero_dirs) {
                let c = b.dot(&v);
                v -= b * c;
            }
            v /= v.norm();
            let i = basis.len();
            basis.push(u);
            basis.push(v);
            blocks.push(Block { coords: vec![i, i + 1], beta });
        } else {
            zero_dirs.push(u);
        }
    }
    if basis.len() + zero_dirs.len() != m {
        return Err(QestimError::internal("direct-sum decomposition did not span the parameter space"));
    }
    for u in zero_dirs {
        let i = basis.len();
        basis.push(u);
        blocks.push(Block { coords: vec![i], beta: 0.0 });
    }
    let o = RMatrix::from_columns(&basis);
    let canonical = o.transpose() * &a * &o;
    let mut off = 0.0f64;
    let mut owner = vec![0usize; m];
    for (bi, b) in blocks.iter().enumerate() {
        for &c in &b.coords {
            owner[c] = bi;
        }
    }
    for i in 0..m {
        for j in 0..m {
            if owner[i] != owner[j] {
                off = off.max(canonical[(i, j)].abs());
            }
        }
    }
    let scale = max_abs_real(&a).max(1.0);
    if off > 1e-9 * scale {
        return Err(QestimError::internal(format!("J̃ is not block diagonal after decomposition ({off:.3e})")));
    }
    let to_block = o.transpose() * geom.js_sqrt();
    let from_block = geom.js_inv_sqrt() * &o;
    Ok(DirectSum { rotation: o, to_block, from_block, blocks, canonical })
}

// ---------------------------------------------------------------------------
// curvature

pub const CURVATURE_STEP: f64 = 1e-4;

/// `F_ij` for `i < j`.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub m: usize,
    components: Vec<CMatrix>,
    pub slds: Vec<CMatrix>,
}

impl Curvature {
    fn index(&self, i: usize, j: usize) -> usize {
        // row-major upper triangle
        i * self.m - i * (i + 1) / 2 + (j - i - 1)
    }

    /// `F_ij`, with `F_ji = −F_ij` and `F_ii = 0`.
    pub fn component(&self, i: usize, j: usize) -> CMatrix {
        let d = self.slds[0].nrows();
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => CMatrix::zeros(d, d),
            std::cmp::Ordering::Less => self.components[self.index(i, j)].clone(),
            std::cmp::Ordering::Greater => -self.components[self.index(j, i)].clone(),
        }
    }

    /// Largest Frobenius norm over the components.
    pub fn max_norm(&self) -> f64 {
        self.components.iter().map(|f| f.norm()).fold(0.0, f64::max)
    }
}

/// `F_ij = (∂_iL_j − ∂_jL_i) − ½[L_i, L_j]` by central differences of the SLDs.
pub fn uhlmann_curvature(model: &ParametricModel, theta: &[f64], step: f64) -> Result<Curvature> {
    if model.is_pure() {
        return Err(QestimError::Precondition("curvature is computed for faithful models only".into()));
    }
    let m = model.n_params();
    let center = sld_solve(model, theta)?;
    let TangentFrame::Faithful { slds, .. } = center else { unreachable!() };
    let mut dl: Vec<Vec<CMatrix>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[i] += step;
        tm[i] -= step;
        let fp = sld_solve(model, &tp)?;
        let fm = sld_solve(model, &tm)?;
        let (TangentFrame::Faithful { slds: lp, .. }, TangentFrame::Faithful { slds: lm, .. }) = (fp, fm) else {
            unreachable!()
        };
        dl.push(lp.iter().zip(&lm).map(|(a, b)| (a - b) * C64::new(0.5 / step, 0.0)).collect());
    }
    let mut components = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let f = &dl[i][j] - &dl[j][i] - commutator(&slds[i], &slds[j]) * C64::new(0.5, 0.0);
            components.push(f);
        }
    }
    Ok(Curvature { m, components, slds })
}

/// Largest `‖[L_i, L_j]‖` over pairs.
pub fn max_sld_commutator(slds: &[CMatrix]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..slds.len() {
        for j in i + 1..slds.len() {
            worst = worst.max(commutator(&slds[i], &slds[j]).norm());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// relative phase factor

/// Largest rotation of the transported state allowed in one step.
pub const MAX_STEP_ANGLE: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct RpfResult {
    /// `W₀⁻¹W(1)` for faithful models, the `1×1` phase for pure ones.
    pub unitary: CMatrix,
    /// `−i ln` of the phase factor (pure models).
    pub phase: Option<f64>,
    pub steps: usize,
    /// Distance of the final state from the initial one.
    pub closure_error: f64,
}

/// `dρ/dt` along the straight segment `a → b` at `θ`.
fn drho_along(model: &ParametricModel, theta: &[f64], dir: &[f64]) -> Result<CMatrix> {
    let tans = tangents(model, theta)?;
    let state = model.state_at(theta)?;
    let d = state.dim();
    let mut out = CMatrix::zeros(d, d);
    for (t, &c) in tans.iter().zip(dir) {
        if c == 0.0 {
            continue;
        }
        let piece = match (t, state.vector()) {
            (Tangent::Vector(dphi), Some(phi)) => dphi * phi.adjoint() + phi * dphi.adjoint(),
            (Tangent::Matrix(dr), None) => dr.clone(),
            _ => return Err(QestimError::internal("tangent kind does not match the state")),
        };
        out += piece * C64::new(c, 0.0);
    }
    Ok(out)
}

/// `½ L W` with `L` the SLD of the direction (`2 dρ/dt` for pure states).
fn generator(model: &ParametricModel, theta: &[f64], dir: &[f64], w: &CMatrix) -> Result<CMatrix> {
    let dr = drho_along(model, theta, dir)?;
    if model.is_pure() {
        Ok(dr * w)
    } else {
        let rho = model.state_at(theta)?.density();
        let l = crate::models::solve_sld(&rho, &dr, &model.tol)?;
        Ok((l * w) * C64::new(0.5, 0.0))
    }
}

fn renormalize(w: CMatrix) -> CMatrix {
    let n = (&w * w.adjoint()).trace().re.sqrt();
    w * C64::new(1.0 / n, 0.0)
}

/// Transports the purification along the closed polygon `vertices` (first
/// vertex repeated implicitly at the end) with fixed-step RK4.
pub fn rpf_transport(model: &ParametricModel, vertices: &[Vec<f64>], steps_per_edge: usize) -> Result<RpfResult> {
    if vertices.len() < 2 {
        return Err(QestimError::validation("a loop needs at least two vertices"));
    }
    if steps_per_edge == 0 {
        return Err(QestimError::validation("steps_per_edge must be positive"));
    }
    let m = model.n_params();
    if vertices.iter().any(|v| v.len() != m) {
        return Err(QestimError::validation("vertex dimension does not match the model"));
    }
    let s0 = model.state_at(&vertices[0])?;
    let w0 = match &s0 {
        crate::operators::QuantumState::Pure(v) => CMatrix::from_column_slice(v.len(), 1, v.as_slice()),
        crate::operators::QuantumState::Mixed(r) => {
            let min = s0.min_eigenvalue()?;
            if min < model.tol.faithful {
                return Err(QestimError::NotFaithful { min_eigenvalue: min, threshold: model.tol.faithful });
            }
            psd_sqrt(r)?
        }
    };
    let mut w = w0.clone();
    let n_edges = vertices.len();
    let mut steps = 0;
    for e in 0..n_edges {
        let a = &vertices[e];
        let b = &vertices[(e + 1) % n_edges];
        let dir: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        if dir.iter().all(|&d| d == 0.0) {
            continue;
        }
        let h = 1.0 / steps_per_edge as f64;
        let point = |t: f64| -> Vec<f64> { a.iter().zip(&dir).map(|(x, d)| x + t * d).collect() };
        for k in 0..steps_per_edge {
            let t = k as f64 * h;
            let hc = C64::new(h, 0.0);
            let k1 = generator(model, &point(t), &dir, &w)?;
            let k2 = generator(model, &point(t + h / 2.0), &dir, &(&w + &k1 * (hc * 0.5)))?;
            let k3 = generator(model, &point(t + h / 2.0), &dir, &(&w + &k2 * (hc * 0.5)))?;
            let k4 = generator(model, &point(t + h), &dir, &(&w + &k3 * hc))?;
            let next = renormalize(&w + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * (hc / 6.0));
            let ov = (w.adjoint() * &next).trace().norm().min(1.0);
            let angle = ov.acos();
            if angle > MAX_STEP_ANGLE {
                return Err(QestimError::StepTooLarge { angle, limit: MAX_STEP_ANGLE });
            }
            w = next;
            steps += 1;
        }
    }
    let closure_error = max_abs(&(&w * w.adjoint() - &w0 * w0.adjoint()));
    if model.is_pure() {
        let z = w0.column(0).dotc(&w.column(0));
        let u = CMatrix::from_element(1, 1, z / z.norm());
        Ok(RpfResult { phase: Some(z.arg()), unitary: u, steps, closure_error })
    } else {
        let inv = w0
            .clone()
            .try_inverse()
            .ok_or_else(|| QestimError::internal("initial purification is singular"))?;
        Ok(RpfResult { unitary: inv * w, phase: None, steps, closure_error })
    }
}

/// Counter-clockwise square of side `eps` in the `(i, j)` coordinate plane.
pub fn square_loop(theta: &[f64], i: usize, j: usize, eps: f64) -> Vec<Vec<f64>> {
    let mut v = vec![theta.to_vec(); 4];
    v[1][i] += eps;
    v[2][i] += eps;
    v[2][j] += eps;
    v[3][j] += eps;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{horizontal_lift, zoo};

    fn canonical_pair(beta: f64) -> (RMatrix, RMatrix) {
        (RMatrix::identity(2, 2), RMatrix::from_row_slice(2, 2, &[0.0, -beta, beta, 0.0]))
    }

    #[test]
    fn two_param_beta() {
        let (js, jt) = canonical_pair(0.6);
        let g = geometry_from_matrices(js, jt, true, &Tolerances::default()).unwrap();
        assert!((g.beta_spectrum[0] - 0.6).abs() < 1e-14);
        assert!(!g.flags.coherent && !g.flags.quasi_classical);
    }

    #[test]
    fn singular_js_rejected() {
        let js = RMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let e = geometry_from_matrices(js, RMatrix::zeros(2, 2), true, &Tolerances::default()).unwrap_err();
        assert!(matches!(e, QestimError::RedundantParameters { .. }));
    }

    #[test]
    fn odd_m_zero_mode() {
        let mut jt = RMatrix::zeros(3, 3);
        jt[(0, 1)] = 0.5;
        jt[(1, 0)] = -0.5;
        let g = geometry_from_matrices(RMatrix::identity(3, 3), jt, true, &Tolerances::default()).unwrap();
        assert_eq!(g.zero_modes, 1);
        assert_eq!(g.alpha_moduli().len(), 3);
        assert!(!coherency_det_check(&g).coherent);
    }

    #[test]
    fn decomposition_recovers_blocks() {
        let m = 4;
        let mut jt = RMatrix::zeros(m, m);
        jt[(0, 1)] = -0.9;
        jt[(1, 0)] = 0.9;
        jt[(2, 3)] = -0.2;
        jt[(3, 2)] = 0.2;
        // mix coordinates with a non-orthogonal map
        let a = RMatrix::from_row_slice(4, 4, &[1.0, 0.3, 0.0, 0.2, 0.1, 1.2, 0.4, 0.0, 0.0, 0.2, 0.9, 0.1, 0.3, 0.0, 0.1, 1.1]);
        let ainv = a.clone().try_inverse().unwrap();
        let js = ainv.transpose() * ainv.clone();
        let jt2 = ainv.transpose() * jt * ainv;
        let g = geometry_from_matrices(js, jt2, true, &Tolerances::default()).unwrap();
        let d = decompose_direct_sum(&g).unwrap();
        let betas: Vec<f64> = d.blocks.iter().map(|b| b.beta).collect();
        assert!((betas[0] - 0.9).abs() < 1e-10 && (betas[1] - 0.2).abs() < 1e-10, "{betas:?}");
        let jsb = d.from_block.transpose() * &g.js * &d.from_block;
        assert!((jsb - RMatrix::identity(4, 4)).amax() < 1e-10);
        assert!((d.canonical[(0, 1)] + 0.9).abs() < 1e-10);
    }

    #[test]
    fn great_circle_lift() {
        let model = zoo::qubit_great_circle();
        let f = horizontal_lift(&model, &[0.0]).unwrap();
        let g = info_geometry(&f).unwrap();
        assert!((g.js[(0, 0)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn classical_family_flat() {
        let model = zoo::bloch_affine([0.0, 0.0, 0.2], vec![[0.0, 0.0, 1.0], [0.0, 0.0, 0.5]]).unwrap();
        let c = uhlmann_curvature(&model, &[0.1, -0.1], CURVATURE_STEP).unwrap();
        assert!(c.max_norm() < 1e-6);
        let f01 = c.component(0, 1);
        assert!(max_abs(&(f01 + c.component(1, 0))) == 0.0);
    }

    #[test]
    fn zero_area_loop_is_identity() {
        let model = zoo::spin_coherent(0.5, 0.5, 1.0).unwrap();
        let r = rpf_transport(&model, &[vec![1.0, 0.3], vec![1.2, 0.4]], 20).unwrap();
        assert!(r.phase.unwrap().abs() < 1e-10);
    }
}
