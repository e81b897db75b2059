//! Classical Fisher information of measurements, optimal post-processing,
//! PVM construction from estimation vectors and Naimark compression.

use serde::{Deserialize, Serialize};

use crate::bounds::{auto_bound, BoundResult, WeightMatrix};
use crate::geometry::{info_geometry_with, max_sld_commutator, InfoGeometry};
use crate::models::{tangent_frame, ParametricModel, TangentFrame};
use crate::operators::{
    gram_schmidt_real_coefficients, hermitian_eigendecomposition, max_abs, max_abs_real, modified_gram_schmidt,
    outer, real_symmetric_eigen, real_symmetric_map, spd_inverse, to_complex,
};
use crate::{CMatrix, CVector, QestimError, RMatrix, RVector, Result, Tolerances, C64};

/// Where a measurement acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ambient {
    Base,
    Dilated(usize),
}

/// Orthogonal projectors with one estimate per outcome.
#[derive(Debug, Clone)]
pub struct PvmEstimator {
    pub theta: Vec<f64>,
    pub projectors: Vec<CMatrix>,
    pub estimates: Vec<RVector>,
    pub ambient: Ambient,
}

/// Tolerance for completeness, idempotence and orthogonality.
pub const PVM_TOL: f64 = 1e-10;

impl PvmEstimator {
    pub fn n_outcomes(&self) -> usize {
        self.projectors.len()
    }

    pub fn dim(&self) -> usize {
        self.projectors.first().map_or(0, |p| p.nrows())
    }

    /// Largest violation of `ΣP = I`, `P² = P` and `P_κP_λ = 0`.
    pub fn pvm_defect(&self) -> f64 {
        let d = self.dim();
        let mut sum = CMatrix::zeros(d, d);
        let mut worst = 0.0f64;
        for (k, p) in self.projectors.iter().enumerate() {
            sum += p;
            worst = worst.max(max_abs(&(p * p - p)));
            for q in &self.projectors[k + 1..] {
                worst = worst.max(max_abs(&(p * q)));
            }
        }
        worst.max(max_abs(&(sum - CMatrix::identity(d, d))))
    }

    pub fn validate(&self) -> Result<()> {
        if self.projectors.is_empty() || self.projectors.len() != self.estimates.len() {
            return Err(QestimError::validation("a PVM needs one estimate per projector"));
        }
        let d = self.dim();
        if self.projectors.iter().any(|p| p.shape() != (d, d)) {
            return Err(QestimError::validation("projectors differ in size"));
        }
        let defect = self.pvm_defect();
        if defect > PVM_TOL {
            return Err(QestimError::validation(format!("projectors do not form a PVM (defect {defect:.3e})")));
        }
        Ok(())
    }

    /// Orthonormal basis refining the projectors, one column per rank-one
    /// piece.
    pub fn basis(&self) -> Result<CMatrix> {
        let d = self.dim();
        let mut cols = Vec::with_capacity(d);
        for p in &self.projectors {
            let eig = hermitian_eigendecomposition(p)?;
            for (k, &v) in eig.values.iter().enumerate() {
                if v > 0.5 {
                    cols.push(eig.vector(k));
                }
            }
        }
        if cols.len() != d {
            return Err(QestimError::validation(format!("projector ranks add to {} instead of {d}", cols.len())));
        }
        Ok(CMatrix::from_columns(&cols))
    }

    /// `Σ p_κ (θ̂_κ − θ)(θ̂_κ − θ)ᵀ`.
    pub fn covariance(&self, dist: &OutcomeDistribution) -> RMatrix {
        let m = self.theta.len();
        let th = RVector::from_column_slice(&self.theta);
        let mut v = RMatrix::zeros(m, m);
        for (p, e) in dist.p.iter().zip(&self.estimates) {
            let c = e - &th;
            v += &c * c.transpose() * *p;
        }
        v
    }

    /// Deviations `|Σ p θ̂ − θ|` and `|Σ ∂_i p θ̂^j − δ_i^j|`.
    pub fn unbiasedness_defect(&self, dist: &OutcomeDistribution) -> (f64, f64) {
        let m = self.theta.len();
        let mut mean = RVector::zeros(m);
        let mut jac = RMatrix::zeros(m, m);
        for (k, e) in self.estimates.iter().enumerate() {
            mean += e * dist.p[k];
            for i in 0..m {
                for j in 0..m {
                    jac[(i, j)] += dist.dp[k][i] * e[j];
                }
            }
        }
        let th = RVector::from_column_slice(&self.theta);
        let mean_err = (mean - th).amax();
        let jac_err = max_abs_real(&(jac - RMatrix::identity(m, m)));
        (mean_err, jac_err)
    }
}

/// Positive operators summing to the identity, with estimates.
#[derive(Debug, Clone)]
pub struct Povm {
    pub theta: Vec<f64>,
    pub elements: Vec<CMatrix>,
    pub estimates: Vec<RVector>,
}

impl Povm {
    pub fn completeness_defect(&self) -> f64 {
        let d = self.elements.first().map_or(0, |e| e.nrows());
        let sum = self.elements.iter().fold(CMatrix::zeros(d, d), |acc, e| acc + e);
        max_abs(&(sum - CMatrix::identity(d, d)))
    }
}

/// Outcome probabilities and their derivatives `dp[κ][i] = ∂_i p_κ`.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    pub p: Vec<f64>,
    pub dp: Vec<RVector>,
}

impl OutcomeDistribution {
    pub fn n_params(&self) -> usize {
        self.dp.first().map_or(0, |d| d.len())
    }
}

const CLIP: f64 = 1e-12;

fn clip(p: f64, k: usize) -> Result<f64> {
    if p < -CLIP {
        return Err(QestimError::validation(format!("outcome {k} has negative probability {p:.3e}")));
    }
    Ok(p.max(0.0))
}

/// `p_κ = tr ρE_κ` and `∂_i p_κ = tr (∂_iρ)E_κ` for arbitrary effects.
pub fn outcome_distribution_frame(frame: &TangentFrame, effects: &[CMatrix]) -> Result<OutcomeDistribution> {
    let d = frame.dim();
    if effects.iter().any(|e| e.shape() != (d, d)) {
        return Err(QestimError::validation(format!("effects must be {d}x{d} to match the state")));
    }
    let m = frame.n_params();
    let mut p = Vec::with_capacity(effects.len());
    let mut dp = Vec::with_capacity(effects.len());
    match frame {
        TangentFrame::Pure { phi, lifts, .. } => {
            for (k, e) in effects.iter().enumerate() {
                let ephi = e * phi;
                p.push(clip(phi.dotc(&ephi).re, k)?);
                dp.push(RVector::from_fn(m, |i, _| lifts[i].dotc(&ephi).re));
            }
        }
        TangentFrame::Faithful { rho, drho, .. } => {
            for (k, e) in effects.iter().enumerate() {
                p.push(clip((rho * e).trace().re, k)?);
                dp.push(RVector::from_fn(m, |i, _| (&drho[i] * e).trace().re));
            }
        }
    }
    Ok(OutcomeDistribution { p, dp })
}

pub fn outcome_distribution(model: &ParametricModel, theta: &[f64], effects: &[CMatrix]) -> Result<OutcomeDistribution> {
    outcome_distribution_frame(&tangent_frame(model, theta)?, effects)
}

#[derive(Debug, Clone)]
pub struct ClassicalFisher {
    pub j: RMatrix,
    /// An excluded zero-probability outcome has a nonzero derivative.
    pub singular: bool,
}

pub fn classical_fisher(dist: &OutcomeDistribution, tol: &Tolerances) -> ClassicalFisher {
    let m = dist.n_params();
    let mut j = RMatrix::zeros(m, m);
    let mut singular = false;
    for (p, d) in dist.p.iter().zip(&dist.dp) {
        if *p > tol.probability_floor {
            j += d * d.transpose() / *p;
        } else if d.amax() > tol.singular_derivative {
            singular = true;
        }
    }
    ClassicalFisher { j, singular }
}

/// Relative eigenvalue floor below which `J_M` counts as singular.
pub const FISHER_RANK_TOL: f64 = 1e-12;

pub fn fisher_inverse(j: &RMatrix) -> Option<RMatrix> {
    let (vals, _) = real_symmetric_eigen(j);
    let max = vals.last().copied().unwrap_or(0.0);
    if max <= 0.0 || vals[0] <= FISHER_RANK_TOL * max {
        return None;
    }
    spd_inverse(j)
}

#[derive(Debug, Clone)]
pub struct PostProcessing {
    /// `Tr G J_M^{−1}`, infinite when `J_M` is singular.
    pub value: f64,
    pub estimates: Option<Vec<RVector>>,
    pub fisher: ClassicalFisher,
}

/// Best locally unbiased estimates for a fixed measurement:
/// `θ̂_κ = θ + J_M^{−1} ∂ log p_κ`.
pub fn optimal_postprocessing(dist: &OutcomeDistribution, theta: &[f64], g: &WeightMatrix, tol: &Tolerances) -> Result<PostProcessing> {
    let m = dist.n_params();
    if theta.len() != m || g.dim() != m {
        return Err(QestimError::validation("θ, weight and distribution disagree on the parameter count"));
    }
    let fisher = classical_fisher(dist, tol);
    let Some(inv) = fisher_inverse(&fisher.j) else {
        return Ok(PostProcessing { value: f64::INFINITY, estimates: None, fisher });
    };
    let th = RVector::from_column_slice(theta);
    let estimates = dist
        .p
        .iter()
        .zip(&dist.dp)
        .map(|(p, d)| if *p > tol.probability_floor { &th + &inv * d / *p } else { th.clone() })
        .collect();
    Ok(PostProcessing { value: (g.matrix() * &inv).trace(), estimates: Some(estimates), fisher })
}

/// Estimation vectors `x^i` and the base point they are attached to.
#[derive(Debug, Clone)]
pub struct EstimationVectors {
    pub phi: CVector,
    pub x: Vec<CVector>,
}

impl EstimationVectors {
    /// `X*X`.
    pub fn gram(&self) -> CMatrix {
        let m = self.x.len();
        CMatrix::from_fn(m, m, |i, j| self.x[i].dotc(&self.x[j]))
    }

    /// `Re X*L` against the given lifts.
    pub fn pairing(&self, lifts: &[CVector]) -> RMatrix {
        let m = self.x.len();
        RMatrix::from_fn(m, lifts.len(), |i, j| self.x[i].dotc(&lifts[j]).re)
    }
}

/// Turns estimation vectors with a real Gram matrix into a locally unbiased
/// PVM whose covariance is `Re X*X`.
pub fn construct_pvm_from_vectors(vectors: &EstimationVectors, theta: &[f64], ambient: Ambient, tol: &Tolerances) -> Result<PvmEstimator> {
    let phi = &vectors.phi;
    let d = phi.len();
    let m = vectors.x.len();
    if theta.len() != m {
        return Err(QestimError::validation("θ and X disagree on the parameter count"));
    }
    if vectors.x.iter().any(|x| x.len() != d) {
        return Err(QestimError::validation("estimation vectors and base point differ in dimension"));
    }
    if (phi.norm() - 1.0).abs() > 1e-10 {
        return Err(QestimError::Precondition("base point is not normalized".into()));
    }
    for (i, x) in vectors.x.iter().enumerate() {
        let ov = phi.dotc(x).norm();
        if ov > 1e-8 * x.norm().max(1.0) {
            return Err(QestimError::Precondition(format!("x^{} is not orthogonal to the base point ({ov:.3e})", i + 1)));
        }
    }
    let gram = vectors.gram();
    let scale = max_abs(&gram).max(1.0);
    let im = gram.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    if im > 1e-8 * scale {
        return Err(QestimError::Precondition(format!("Im X*X = {im:.3e} is not zero")));
    }

    let mut system = Vec::with_capacity(m + 1);
    system.push(phi.clone());
    system.extend(vectors.x.iter().cloned());
    let schmidt = gram_schmidt_real_coefficients(&system, tol)?;
    if schmidt.max_imag > 1e-9 * scale.sqrt() {
        return Err(QestimError::internal(format!("Schmidt coefficients have imaginary part {:.3e}", schmidt.max_imag)));
    }
    let n = schmidt.rank();
    let o = uniform_first_column_orthogonal(n);
    let th = RVector::from_column_slice(theta);
    let mut projectors = Vec::with_capacity(n + 1);
    let mut estimates = Vec::with_capacity(n + 1);
    let mut total = CMatrix::zeros(d, d);
    for k in 0..n {
        let mut b = CVector::zeros(d);
        for j in 0..n {
            b += &schmidt.basis[j] * C64::new(o[(k, j)], 0.0);
        }
        let p = outer(&b, &b);
        total += &p;
        projectors.push(p);
        let corr = RVector::from_fn(m, |i, _| {
            let s: f64 = (0..n).map(|j| schmidt.coefficients[(j, i + 1)] * o[(k, j)]).sum();
            s / o[(k, 0)]
        });
        estimates.push(&th + corr);
    }
    let rest = CMatrix::identity(d, d) - total;
    if rest.trace().re > 0.5 {
        projectors.push(rest);
        estimates.push(th.clone());
    }
    let pvm = PvmEstimator { theta: theta.to_vec(), projectors, estimates, ambient };
    let defect = pvm.pvm_defect();
    if defect > PVM_TOL {
        return Err(QestimError::internal(format!("constructed PVM defect {defect:.3e}")));
    }
    // covariance check against Re X*X, using p_κ = |⟨b'|φ⟩|²
    let dist = OutcomeDistribution {
        p: pvm.projectors.iter().map(|p| phi.dotc(&(p * phi)).re.max(0.0)).collect(),
        dp: vec![RVector::zeros(m); pvm.projectors.len()],
    };
    let cov = pvm.covariance(&dist);
    let target = RMatrix::from_fn(m, m, |i, j| gram[(i, j)].re);
    let err = max_abs_real(&(&cov - &target));
    if err > 1e-9 * scale {
        return Err(QestimError::internal(format!("constructed PVM covariance misses Re X*X by {err:.3e}")));
    }
    Ok(pvm)
}

/// Householder reflection whose first column is `(1, …, 1)/√n`.
pub fn uniform_first_column_orthogonal(n: usize) -> RMatrix {
    let w = RVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut u = -w;
    u[0] += 1.0;
    let uu = u.norm_squared();
    if uu < 1e-30 {
        return RMatrix::identity(n, n);
    }
    RMatrix::identity(n, n) - &u * u.transpose() * (2.0 / uu)
}

/// Isometric copy of `span{φ, l₁, …, l_m}` inside `C^D`.
#[derive(Debug, Clone)]
pub struct Embedding {
    /// `D × d` partial isometry; row `k < r` is the `k`-th basis bra.
    pub iso: CMatrix,
    /// Dimension of the embedded span.
    pub span_dim: usize,
}

impl Embedding {
    pub fn dilated_dim(&self) -> usize {
        self.iso.nrows()
    }

    pub fn base_dim(&self) -> usize {
        self.iso.ncols()
    }

    pub fn embed(&self, v: &CVector) -> CVector {
        &self.iso * v
    }

    /// The frame with `φ` and the lifts carried into `C^D`.
    pub fn embed_frame(&self, frame: &TangentFrame) -> Result<TangentFrame> {
        match frame {
            TangentFrame::Pure { theta, phi, lifts } => Ok(TangentFrame::Pure {
                theta: theta.clone(),
                phi: self.embed(phi),
                lifts: lifts.iter().map(|l| self.embed(l)).collect(),
            }),
            TangentFrame::Faithful { .. } => Err(QestimError::Precondition("only pure frames are embedded".into())),
        }
    }
}

/// Embeds the span of a pure frame into `C^D`, `D ≥` its dimension.
pub fn embed_pure_frame(frame: &TangentFrame, dilated_dim: usize) -> Result<Embedding> {
    let TangentFrame::Pure { phi, lifts, .. } = frame else {
        return Err(QestimError::Precondition("dilation needs a pure frame".into()));
    };
    let mut system = vec![phi.clone()];
    system.extend(lifts.iter().cloned());
    let (basis, _, _) = modified_gram_schmidt(&system, 1e-10);
    let r = basis.len();
    if r > dilated_dim {
        return Err(QestimError::validation(format!("span has dimension {r}, more than the dilation {dilated_dim}")));
    }
    let d = phi.len();
    let mut iso = CMatrix::zeros(dilated_dim, d);
    for (k, b) in basis.iter().enumerate() {
        iso.set_row(k, &b.adjoint());
    }
    Ok(Embedding { iso, span_dim: r })
}

/// Estimation vectors realizing a closed-form optimum, living in `C^{2m+1}`.
#[derive(Debug, Clone)]
pub struct DilatedVectors {
    pub vectors: EstimationVectors,
    pub embedding: Embedding,
    /// Embedded lifts, for checking `Re X*L = I`.
    pub lifts: Vec<CVector>,
    /// `Re X*X`.
    pub covariance: RMatrix,
}

/// Relative tolerance for `Re X*L = I`, `Im X*X = 0` and `Re X*X = V`.
pub const VECTOR_CHECK_TOL: f64 = 1e-8;

fn vector_defects(x: &EstimationVectors, lifts: &[CVector], v: &RMatrix) -> (f64, f64, f64) {
    let m = lifts.len();
    let gram = x.gram();
    let scale = max_abs_real(v).max(1.0);
    let e1 = max_abs_real(&(x.pairing(lifts) - RMatrix::identity(m, m)));
    let e2 = gram.iter().fold(0.0f64, |a, z| a.max(z.im.abs())) / scale;
    let e3 = max_abs_real(&(RMatrix::from_fn(m, m, |i, j| gram[(i, j)].re) - v)) / scale;
    (e1, e2, e3)
}

/// `X = L V G (G − iΛ)^{−1}`, or `X = L J^{S−1} ⊕ (V − X∥*X∥)^{1/2}` on the
/// extra dimensions when `G − iΛ` is singular.
pub fn optimal_vectors_two_param(frame: &TangentFrame, bound: &BoundResult) -> Result<DilatedVectors> {
    let TangentFrame::Pure { .. } = frame else {
        return Err(QestimError::Precondition("estimation vectors need a pure frame".into()));
    };
    let m = frame.n_params();
    let Some(v) = bound.v_opt.as_ref() else {
        return Err(QestimError::Precondition("the bound has no optimal covariance (infimum only)".into()));
    };
    let g = &bound.g;
    if v.shape() != (m, m) || g.shape() != (m, m) {
        return Err(QestimError::validation("bound and frame disagree on the parameter count"));
    }
    let dim = 2 * m + 1;
    let embedding = embed_pure_frame(frame, dim)?;
    let TangentFrame::Pure { phi, lifts, .. } = embedding.embed_frame(frame)? else { unreachable!() };
    let lmat = CMatrix::from_columns(&lifts);

    let lambda = bound.lambda.clone().unwrap_or_else(|| RMatrix::zeros(m, m));
    let k = to_complex(g) - to_complex(&lambda) * C64::new(0.0, 1.0);
    let (kvals, _) = {
        let kk = k.adjoint() * &k;
        let e = hermitian_eigendecomposition(&kk)?;
        (e.values, ())
    };
    let kmax = kvals.last().copied().unwrap_or(0.0);
    let invertible = kmax > 0.0 && kvals[0] > 1e-20 * kmax;
    if invertible {
        if let Some(kinv) = k.clone().try_inverse() {
            let xm = &lmat * to_complex(v) * to_complex(g) * kinv;
            let x = EstimationVectors { phi: phi.clone(), x: xm.column_iter().map(|c| c.into_owned()).collect() };
            let (e1, e2, e3) = vector_defects(&x, &lifts, v);
            if e1 <= VECTOR_CHECK_TOL && e2 <= VECTOR_CHECK_TOL && e3 <= VECTOR_CHECK_TOL {
                return Ok(DilatedVectors { vectors: x, embedding, lifts, covariance: v.clone() });
            }
        }
    }

    // G − iΛ is singular: realize the covariance J^{S−1} + G^{−1/2}|B|G^{−1/2},
    // B = G^{1/2}J^{S−1}J̃J^{S−1}G^{1/2}, which has the same weighted trace on
    // coherent pairs and is exactly realizable.
    let js = RMatrix::from_fn(m, m, |i, j| lifts[i].dotc(&lifts[j]).re);
    let jt = RMatrix::from_fn(m, m, |i, j| lifts[i].dotc(&lifts[j]).im);
    let jinv = spd_inverse(&js).ok_or(QestimError::RedundantParameters { rank: 0, params: m })?;
    let (gvals, _) = real_symmetric_eigen(g);
    if gvals[0] <= 1e-12 * gvals[m - 1].max(f64::MIN_POSITIVE) {
        return Err(QestimError::Precondition("a singular weight has no attaining measurement".into()));
    }
    let gh = real_symmetric_map(g, f64::sqrt);
    let ghi = real_symmetric_map(g, |x| 1.0 / x.sqrt());
    let a = &jinv * &jt * &jinv;
    let b = &gh * &a * &gh;
    let absb = real_symmetric_map(&(&b * b.transpose()), |x| x.max(0.0).sqrt());
    let vh = &jinv + &ghi * absb * &ghi;
    let target = (g * v).trace();
    let got = (g * &vh).trace();
    if (got - target).abs() > 1e-6 * target.abs().max(1.0) {
        return Err(QestimError::Precondition(format!(
            "covariance is not realizable by a dilated PVM (Tr GV = {target}, realizable {got})"
        )));
    }
    let v = &vh;
    let xpar = &lmat * to_complex(&jinv);
    let h = to_complex(v) - xpar.adjoint() * &xpar;
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = hermitian_eigendecomposition(&h)?;
    let hroot = eig.map(|x| C64::new(x.max(0.0).sqrt(), 0.0));
    let r = embedding.span_dim;
    let mut xm = xpar;
    for i in 0..m {
        for kk in 0..m {
            xm[(r + kk, i)] += hroot[(kk, i)];
        }
    }
    let x = EstimationVectors { phi, x: xm.column_iter().map(|c| c.into_owned()).collect() };
    let (e1, e2, e3) = vector_defects(&x, &lifts, v);
    if e1 > VECTOR_CHECK_TOL || e2 > VECTOR_CHECK_TOL || e3 > VECTOR_CHECK_TOL {
        return Err(QestimError::internal(format!(
            "estimation vectors fail their checks (Re X*L {e1:.3e}, Im X*X {e2:.3e}, Re X*X {e3:.3e})"
        )));
    }
    Ok(DilatedVectors { vectors: x, embedding, lifts, covariance: v.clone() })
}

/// Common eigenbasis PVM of commuting SLDs with
/// `θ̂(ω) = θ + J^{S−1} λ(ω)`.
pub fn commuting_sld_estimator(frame: &TangentFrame, tol: &Tolerances) -> Result<PvmEstimator> {
    let TangentFrame::Faithful { theta, slds, .. } = frame else {
        return Err(QestimError::Precondition("the commuting-SLD estimator needs a faithful frame".into()));
    };
    let norm = max_sld_commutator(slds);
    if norm > 1e-8 {
        return Err(QestimError::NonCommuting { norm });
    }
    let geom = info_geometry_with(frame, tol)?;
    let jinv = geom.js_inverse()?;
    let d = frame.dim();
    let m = slds.len();
    let scale = slds.iter().map(max_abs).fold(0.0f64, f64::max).max(1e-300);
    for attempt in 0..8 {
        let mut a = CMatrix::zeros(d, d);
        for (k, l) in slds.iter().enumerate() {
            let c = ((k + 1) as f64 * (0.618_033_988_749_895 + attempt as f64 * 0.414_213_562)).fract() + 0.5;
            a += l * C64::new(c, 0.0);
        }
        let eig = hermitian_eigendecomposition(&a)?;
        let u = &eig.vectors;
        let diag: Vec<CMatrix> = slds.iter().map(|l| u.adjoint() * l * u).collect();
        let off = diag
            .iter()
            .map(|t| {
                let mut w = 0.0f64;
                for i in 0..d {
                    for j in 0..d {
                        if i != j {
                            w = w.max(t[(i, j)].norm());
                        }
                    }
                }
                w
            })
            .fold(0.0f64, f64::max);
        if off > 1e-7 * scale {
            continue;
        }
        let th = RVector::from_column_slice(theta);
        let mut projectors = Vec::with_capacity(d);
        let mut estimates = Vec::with_capacity(d);
        for w in 0..d {
            let e = u.column(w).into_owned();
            projectors.push(outer(&e, &e));
            let lam = RVector::from_fn(m, |k, _| diag[k][(w, w)].re);
            estimates.push(&th + &jinv * lam);
        }
        return Ok(PvmEstimator { theta: theta.clone(), projectors, estimates, ambient: Ambient::Base });
    }
    Err(QestimError::internal("no common eigenbasis found for commuting SLDs"))
}

/// `M_κ = V*E_κV` on the base space. The part of the identity outside the
/// embedded span becomes an extra outcome estimating `θ`.
pub fn naimark_compress(pvm: &PvmEstimator, embedding: &Embedding) -> Result<Povm> {
    if pvm.dim() != embedding.dilated_dim() {
        return Err(QestimError::validation(format!(
            "PVM acts on dimension {} but the embedding has {}",
            pvm.dim(),
            embedding.dilated_dim()
        )));
    }
    let iso = &embedding.iso;
    let mut elements: Vec<CMatrix> = pvm.projectors.iter().map(|e| iso.adjoint() * e * iso).collect();
    let mut estimates = pvm.estimates.clone();
    let d = embedding.base_dim();
    let sum = elements.iter().fold(CMatrix::zeros(d, d), |acc, e| acc + e);
    let rest = CMatrix::identity(d, d) - sum;
    if max_abs(&rest) > PVM_TOL {
        elements.push(rest);
        estimates.push(RVector::from_column_slice(&pvm.theta));
    }
    Ok(Povm { theta: pvm.theta.clone(), elements, estimates })
}

/// An optimal measurement together with its diagnostics.
#[derive(Debug, Clone)]
pub struct MeasurementPlan {
    pub geometry: InfoGeometry,
    pub bound: BoundResult,
    pub pvm: PvmEstimator,
    pub embedding: Option<Embedding>,
    pub povm: Option<Povm>,
    /// Distribution of the PVM on its own space.
    pub distribution: OutcomeDistribution,
    pub fisher: ClassicalFisher,
    /// `Tr G J_M^{−1}` after optimal post-processing.
    pub min_weighted_variance: f64,
}

/// Builds the measurement attaining the closed-form bound at `θ`.
pub fn optimal_measurement(model: &ParametricModel, theta: &[f64], g: &WeightMatrix) -> Result<MeasurementPlan> {
    let tol = model.tol;
    let frame = tangent_frame(model, theta)?;
    optimal_measurement_frame(&frame, g, &tol)
}

pub fn optimal_measurement_frame(frame: &TangentFrame, g: &WeightMatrix, tol: &Tolerances) -> Result<MeasurementPlan> {
    let geometry = info_geometry_with(frame, tol)?;
    let bound = auto_bound(&geometry, g)?;
    let theta = frame.theta().to_vec();
    let (pvm, embedding, povm, space_frame) = match frame {
        TangentFrame::Faithful { .. } => {
            let pvm = commuting_sld_estimator(frame, tol).map_err(|e| match e {
                QestimError::NonCommuting { norm } => QestimError::Precondition(format!(
                    "SLDs do not commute (‖[L_i, L_j]‖ = {norm:.3e}); no closed-form measurement, use the oracle"
                )),
                e => e,
            })?;
            (pvm, None, None, frame.clone())
        }
        TangentFrame::Pure { phi, lifts, .. } if geometry.flags.quasi_classical => {
            let v = geometry.js_inverse()?;
            let lmat = CMatrix::from_columns(lifts);
            let xm = lmat * to_complex(&v);
            let x = EstimationVectors { phi: phi.clone(), x: xm.column_iter().map(|c| c.into_owned()).collect() };
            let pvm = construct_pvm_from_vectors(&x, &theta, Ambient::Base, tol)?;
            (pvm, None, None, frame.clone())
        }
        TangentFrame::Pure { .. } => {
            let dv = optimal_vectors_two_param(frame, &bound)?;
            let dim = dv.embedding.dilated_dim();
            let pvm = construct_pvm_from_vectors(&dv.vectors, &theta, Ambient::Dilated(dim), tol)?;
            let povm = naimark_compress(&pvm, &dv.embedding)?;
            let ef = dv.embedding.embed_frame(frame)?;
            (pvm, Some(dv.embedding), Some(povm), ef)
        }
    };
    let distribution = outcome_distribution_frame(&space_frame, &pvm.projectors)?;
    let (mean_err, jac_err) = pvm.unbiasedness_defect(&distribution);
    let scale = theta.iter().fold(1.0f64, |a, t| a.max(t.abs()));
    if mean_err > 1e-8 * scale || jac_err > 1e-8 {
        return Err(QestimError::internal(format!(
            "constructed estimator is not locally unbiased (mean {mean_err:.3e}, derivative {jac_err:.3e})"
        )));
    }
    let post = optimal_postprocessing(&distribution, &theta, g, tol)?;
    Ok(MeasurementPlan {
        geometry,
        bound,
        pvm,
        embedding,
        povm,
        distribution,
        fisher: post.fisher,
        min_weighted_variance: post.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::cr_two_param;
    use crate::geometry::info_geometry;
    use crate::models::zoo;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn basis_pvm(d: usize) -> Vec<CMatrix> {
        (0..d)
            .map(|k| {
                let mut p = CMatrix::zeros(d, d);
                p[(k, k)] = c(1.0);
                p
            })
            .collect()
    }

    #[test]
    fn basis_distribution_on_great_circle() {
        let m = zoo::qubit_great_circle();
        let th = std::f64::consts::FRAC_PI_3;
        let dist = outcome_distribution(&m, &[th], &basis_pvm(2)).unwrap();
        assert!((dist.p[0] - (th / 2.0).cos().powi(2)).abs() < 1e-12);
        assert!((dist.p[1] - (th / 2.0).sin().powi(2)).abs() < 1e-12);
        assert!((dist.dp[0][0] + dist.dp[1][0]).abs() < 1e-12);
        let f = classical_fisher(&dist, &Tolerances::default());
        assert!((f.j[(0, 0)] - 1.0).abs() < 1e-8);
        assert!(!f.singular);
        let post = optimal_postprocessing(&dist, &[th], &WeightMatrix::identity(1), &Tolerances::default()).unwrap();
        assert!((post.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn trivial_measurement_has_no_information() {
        let m = zoo::qubit_great_circle();
        let dist = outcome_distribution(&m, &[0.4], &[CMatrix::identity(2, 2)]).unwrap();
        let f = classical_fisher(&dist, &Tolerances::default());
        assert!(f.j[(0, 0)].abs() < 1e-12);
        let post = optimal_postprocessing(&dist, &[0.4], &WeightMatrix::identity(1), &Tolerances::default()).unwrap();
        assert!(post.value.is_infinite() && post.estimates.is_none());
    }

    #[test]
    fn refinement_keeps_the_optimum() {
        let m = zoo::qubit_great_circle();
        let pv = basis_pvm(2);
        let split = vec![pv[0].clone() * c(0.3), pv[0].clone() * c(0.7), pv[1].clone()];
        let tol = Tolerances::default();
        let g = WeightMatrix::identity(1);
        let a = optimal_postprocessing(&outcome_distribution(&m, &[0.9], &pv).unwrap(), &[0.9], &g, &tol).unwrap();
        let b = optimal_postprocessing(&outcome_distribution(&m, &[0.9], &split).unwrap(), &[0.9], &g, &tol).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn one_parameter_construction() {
        let phi = CVector::from_vec(vec![c(1.0), c(0.0)]);
        let x = CVector::from_vec(vec![c(0.0), c(0.5)]);
        let vecs = EstimationVectors { phi, x: vec![x] };
        let pvm = construct_pvm_from_vectors(&vecs, &[0.2], Ambient::Base, &Tolerances::default()).unwrap();
        assert_eq!(pvm.n_outcomes(), 2);
        let mut est: Vec<f64> = pvm.estimates.iter().map(|e| e[0] - 0.2).collect();
        est.sort_by(f64::total_cmp);
        assert!((est[0] + 0.5).abs() < 1e-12 && (est[1] - 0.5).abs() < 1e-12);
        for p in &pvm.projectors {
            assert!((p[(0, 0)].re - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn householder_first_column() {
        for n in 1..6 {
            let o = uniform_first_column_orthogonal(n);
            assert!(max_abs_real(&(o.transpose() * &o - RMatrix::identity(n, n))) < 1e-14);
            for k in 0..n {
                assert!((o[(k, 0)] - 1.0 / (n as f64).sqrt()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quasi_classical_measurement_attains_floor() {
        let m = zoo::real_amplitude(2).unwrap();
        let th = [0.7, 0.4];
        let plan = optimal_measurement(&m, &th, &WeightMatrix::identity(2)).unwrap();
        let inv = plan.geometry.js_inverse().unwrap();
        let cov = plan.pvm.covariance(&plan.distribution);
        assert!(max_abs_real(&(cov - &inv)) < 1e-8);
        assert!((plan.min_weighted_variance - inv.trace()).abs() < 1e-8);
        assert_eq!(plan.pvm.ambient, Ambient::Base);
    }

    fn synthetic_plan(beta: f64, g: RMatrix) -> (MeasurementPlan, BoundResult) {
        let m = zoo::synthetic_blocks(&[beta]).unwrap();
        let frame = tangent_frame(&m, &[0.0, 0.0]).unwrap();
        let geom = info_geometry(&frame).unwrap();
        let w = WeightMatrix::new(g).unwrap();
        let bound = cr_two_param(&geom, &w).unwrap();
        (optimal_measurement_frame(&frame, &w, &Tolerances::default()).unwrap(), bound)
    }

    #[test]
    fn two_parameter_pipeline_matches_closed_form() {
        for &beta in &[0.3, 0.6, 0.95] {
            let (plan, bound) = synthetic_plan(beta, RMatrix::identity(2, 2));
            let v = bound.v_opt.unwrap();
            let cov = plan.pvm.covariance(&plan.distribution);
            assert!(max_abs_real(&(cov - &v)) < 1e-8, "β = {beta}");
            assert!((plan.min_weighted_variance - bound.cr_value).abs() < 1e-8);
            let povm = plan.povm.as_ref().unwrap();
            assert!(povm.completeness_defect() < 1e-10);
        }
    }

    #[test]
    fn coherent_pipeline_reaches_nine() {
        let g = RMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let (plan, bound) = synthetic_plan(1.0, g.clone());
        assert!((bound.cr_value - 9.0).abs() < 1e-8);
        let cov = plan.pvm.covariance(&plan.distribution);
        assert!(((g * cov).trace() - 9.0).abs() < 1e-8);
    }

    #[test]
    fn compression_preserves_probabilities() {
        let m = zoo::spin_coherent(1.0, 1.0, 1.0).unwrap();
        let th = [0.8, 0.3];
        let g = WeightMatrix::new(RMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        let plan = optimal_measurement(&m, &th, &g).unwrap();
        let povm = plan.povm.unwrap();
        let base = outcome_distribution(&m, &th, &povm.elements).unwrap();
        for (k, p) in plan.distribution.p.iter().enumerate() {
            assert!((base.p[k] - p).abs() < 1e-10);
        }
        for e in &povm.elements {
            let eig = hermitian_eigendecomposition(e).unwrap();
            assert!(eig.values[0] > -1e-10 && *eig.values.last().unwrap() < 1.0 + 1e-10);
        }
    }

    #[test]
    fn canonical_energy_basis_estimator() {
        let energies = vec![0.0, 0.7, 1.9];
        let m = zoo::canonical(energies.clone(), 1.0, 1.0).unwrap();
        let t = 0.9;
        let frame = tangent_frame(&m, &[t]).unwrap();
        let pvm = commuting_sld_estimator(&frame, &Tolerances::default()).unwrap();
        let fam = zoo::Canonical::new(energies, 1.0).unwrap();
        let best = fam.best_estimates(t).unwrap();
        let dist = outcome_distribution_frame(&frame, &pvm.projectors).unwrap();
        for (p, e) in pvm.projectors.iter().zip(&pvm.estimates) {
            let level = (0..3).max_by(|&a, &b| p[(a, a)].re.total_cmp(&p[(b, b)].re)).unwrap();
            assert!((e[0] - best[level]).abs() < 1e-10);
        }
        let cov = pvm.covariance(&dist);
        let geom = info_geometry(&frame).unwrap();
        assert!((cov[(0, 0)] * geom.js[(0, 0)] - 1.0).abs() < 1e-8);
        let f = classical_fisher(&dist, &Tolerances::default());
        assert!((f.j[(0, 0)] - geom.js[(0, 0)]).abs() < 1e-10);
    }

    #[test]
    fn noncommuting_slds_refused() {
        let m = zoo::bloch_affine([0.1, 0.1, 0.1], vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let frame = tangent_frame(&m, &[0.1, 0.2]).unwrap();
        assert!(matches!(commuting_sld_estimator(&frame, &Tolerances::default()), Err(QestimError::NonCommuting { .. })));
    }

    #[test]
    fn trivial_dilation_is_identity() {
        let phi = CVector::from_vec(vec![c(1.0), c(0.0)]);
        let l = CVector::from_vec(vec![c(0.0), c(1.0)]);
        let frame = TangentFrame::pure_from_lifts(vec![0.0], phi.clone(), vec![l.clone()], &Tolerances::default()).unwrap();
        let emb = embed_pure_frame(&frame, 2).unwrap();
        let x = EstimationVectors { phi: emb.embed(&phi), x: vec![emb.embed(&l)] };
        let pvm = construct_pvm_from_vectors(&x, &[0.0], Ambient::Base, &Tolerances::default()).unwrap();
        let povm = naimark_compress(&pvm, &emb).unwrap();
        assert_eq!(povm.elements.len(), pvm.n_outcomes());
        let d0 = outcome_distribution_frame(&frame, &povm.elements).unwrap();
        let d1 = outcome_distribution_frame(&emb.embed_frame(&frame).unwrap(), &pvm.projectors).unwrap();
        for (a, b) in d0.p.iter().zip(&d1.p) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
