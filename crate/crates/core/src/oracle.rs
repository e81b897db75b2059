//! Seeded stochastic search over projective measurements.
//!
//! Each restart draws a Haar-random basis of the search space and
//! hill-climbs over random complex Givens rotations, scoring a basis by
//! `Tr G J_M^{−1}` after optimal post-processing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{sld_floor, BoundResult, WeightMatrix};
use crate::geometry::info_geometry_with;
use crate::measurements::{
    embed_pure_frame, fisher_inverse, optimal_postprocessing, outcome_distribution_frame, Ambient, PvmEstimator,
};
use crate::models::{tangent_frame, ParametricModel, TangentFrame};
use crate::operators::outer;
use crate::{CMatrix, CVector, QestimError, RMatrix, Result, Tolerances, C64};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub local_steps: usize,
    pub seed: u64,
    /// Search dimension; `None` means `2m + 1`.
    pub dilate_dim: Option<usize>,
    pub initial_step: f64,
    pub decay: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { restarts: 64, local_steps: 2000, seed: 0, dilate_dim: None, initial_step: 0.3, decay: 0.995 }
    }
}

impl SearchConfig {
    pub fn with_seed(seed: u64) -> Self {
        SearchConfig { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(QestimError::validation("restarts must be at least 1"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(QestimError::validation("initial step must be positive"));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(QestimError::validation("decay must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// The state and its tangents expressed in the search space.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    frame: TangentFrame,
    dim: usize,
    /// `D × d` map from the base space, when the frame was embedded.
    pub iso: Option<CMatrix>,
}

impl SearchSpace {
    /// Pure frames are restricted to `span{φ, l_i}` and embedded in
    /// `C^D`; faithful frames are padded with zeros.
    pub fn new(frame: &TangentFrame, dilate_dim: Option<usize>) -> Result<Self> {
        let m = frame.n_params();
        let want = dilate_dim.unwrap_or(2 * m + 1);
        if want < m + 1 {
            return Err(QestimError::validation(format!("search dimension {want} is below m + 1 = {}", m + 1)));
        }
        match frame {
            TangentFrame::Pure { .. } => {
                let emb = embed_pure_frame(frame, want.max(1))?;
                let f = emb.embed_frame(frame)?;
                Ok(SearchSpace { frame: f, dim: want, iso: Some(emb.iso) })
            }
            TangentFrame::Faithful { theta, rho, drho, slds } => {
                let d = rho.nrows();
                let dim = want.max(d);
                let pad = |a: &CMatrix| {
                    let mut b = CMatrix::zeros(dim, dim);
                    b.view_mut((0, 0), (d, d)).copy_from(a);
                    b
                };
                let f = TangentFrame::Faithful {
                    theta: theta.clone(),
                    rho: pad(rho),
                    drho: drho.iter().map(pad).collect(),
                    slds: slds.iter().map(pad).collect(),
                };
                let mut iso = CMatrix::zeros(dim, d);
                iso.view_mut((0, 0), (d, d)).copy_from(&CMatrix::identity(d, d));
                Ok(SearchSpace { frame: f, dim, iso: Some(iso) })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self) -> &TangentFrame {
        &self.frame
    }

    /// Probability and score vector `∂p/√p` of one basis vector, or `None`
    /// for an excluded outcome. The flag marks a singular exclusion.
    fn outcome(&self, b: &CVector, tol: &Tolerances, score: &mut [f64]) -> (bool, bool) {
        match &self.frame {
            TangentFrame::Pure { phi, lifts, .. } => {
                let w = b.dotc(phi);
                let p = w.norm_sqr();
                let unit = if p > 0.0 { w / p.sqrt() } else { C64::new(0.0, 0.0) };
                let mut big = false;
                for (s, l) in score.iter_mut().zip(lifts) {
                    let bl = b.dotc(l);
                    *s = (bl * unit.conj()).re;
                    big |= (bl * w.conj()).re.abs() > tol.singular_derivative;
                }
                if p > tol.probability_floor {
                    (true, false)
                } else {
                    (false, big)
                }
            }
            TangentFrame::Faithful { rho, drho, .. } => {
                let p = b.dotc(&(rho * b)).re;
                let mut big = false;
                for (s, d) in score.iter_mut().zip(drho) {
                    let dp = b.dotc(&(d * b)).re;
                    big |= dp.abs() > tol.singular_derivative;
                    *s = if p > 0.0 { dp / p.sqrt() } else { 0.0 };
                }
                if p > tol.probability_floor {
                    (true, false)
                } else {
                    (false, big)
                }
            }
        }
    }

    /// `Tr G J_M^{−1}` of a basis given as the columns of `u`.
    pub fn score_basis(&self, u: &CMatrix, g: &RMatrix, tol: &Tolerances) -> f64 {
        let m = self.frame.n_params();
        let mut j = RMatrix::zeros(m, m);
        let mut s = vec![0.0; m];
        for k in 0..u.ncols() {
            let b = u.column(k).into_owned();
            let (kept, _) = self.outcome(&b, tol, &mut s);
            if kept {
                for a in 0..m {
                    for c in 0..m {
                        j[(a, c)] += s[a] * s[c];
                    }
                }
            }
        }
        match fisher_inverse(&j) {
            Some(inv) => (g * inv).trace(),
            None => f64::INFINITY,
        }
    }

    /// Rank-one PVM with optimal estimates for a basis.
    pub fn estimator(&self, u: &CMatrix, g: &WeightMatrix, tol: &Tolerances) -> Result<PvmEstimator> {
        let projectors: Vec<CMatrix> = (0..u.ncols()).map(|k| {
            let b = u.column(k).into_owned();
            outer(&b, &b)
        }).collect();
        let theta = self.frame.theta().to_vec();
        let dist = outcome_distribution_frame(&self.frame, &projectors)?;
        let post = optimal_postprocessing(&dist, &theta, g, tol)?;
        let estimates = post.estimates.ok_or_else(|| QestimError::Precondition("singular classical Fisher matrix".into()))?;
        Ok(PvmEstimator { theta, projectors, estimates, ambient: Ambient::Dilated(self.dim) })
    }
}

/// Haar-random unitary from the QR factorization of a complex Gaussian
/// matrix, with the phases of `R`'s diagonal divided out.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let z = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) / 2f64.sqrt()
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..n {
        let d = r[(k, k)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= ph;
    }
    q
}

/// Applies a Givens rotation of angle `t` and phase `chi` to columns `a`, `b`.
fn givens(u: &mut CMatrix, a: usize, b: usize, t: f64, chi: f64) {
    let (s, c) = t.sin_cos();
    let e = C64::from_polar(1.0, chi);
    let ca = u.column(a).into_owned();
    let cb = u.column(b).into_owned();
    u.set_column(a, &(&ca * C64::new(c, 0.0) + &cb * (e * s)));
    u.set_column(b, &(&cb * C64::new(c, 0.0) - &ca * (e.conj() * s)));
}

/// Outcome of one restart.
#[derive(Debug, Clone)]
pub struct RestartResult {
    pub index: usize,
    pub value: f64,
    pub basis: CMatrix,
}

fn hill_climb(space: &SearchSpace, g: &RMatrix, cfg: &SearchConfig, tol: &Tolerances, start: CMatrix, rng: &mut ChaCha8Rng) -> (f64, CMatrix) {
    let n = space.dim();
    let mut u = start;
    let mut best = space.score_basis(&u, g, tol);
    let mut step = cfg.initial_step;
    if n < 2 {
        return (best, u);
    }
    for _ in 0..cfg.local_steps {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let t = rng.random_range(-step..=step);
        let chi = rng.random_range(0.0..std::f64::consts::TAU);
        let mut cand = u.clone();
        givens(&mut cand, a, b, t, chi);
        let v = space.score_basis(&cand, g, tol);
        if v < best {
            best = v;
            u = cand;
        }
        step *= cfg.decay;
    }
    (best, u)
}

fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Best `Tr G J_M^{−1}` found, infinite if every restart was singular.
    pub best_value: f64,
    pub best: Option<PvmEstimator>,
    pub best_restart: Option<usize>,
    /// Final value of every restart, by index.
    pub restart_values: Vec<f64>,
    /// `(restart, running best)` in restart order.
    pub trace: Vec<(usize, f64)>,
    /// `Tr G J^{S−1}`, the floor.
    pub floor: f64,
    pub dim: usize,
}

impl OracleResult {
    pub fn all_singular(&self) -> bool {
        !self.best_value.is_finite()
    }
}

/// Minimizes `Tr G J_M^{−1}` over rank-one PVMs of the search space.
pub fn oracle_min_weighted_variance(model: &ParametricModel, theta: &[f64], g: &WeightMatrix, cfg: &SearchConfig) -> Result<OracleResult> {
    let frame = tangent_frame(model, theta)?;
    oracle_frame(&frame, g, cfg, None, &model.tol)
}

/// Same as [`oracle_min_weighted_variance`] on a precomputed frame, with an
/// optional warm-start basis used as restart 0.
pub fn oracle_frame(frame: &TangentFrame, g: &WeightMatrix, cfg: &SearchConfig, warm: Option<&CMatrix>, tol: &Tolerances) -> Result<OracleResult> {
    cfg.validate()?;
    let geom = info_geometry_with(frame, tol)?;
    let floor = sld_floor(&geom, g)?;
    let space = SearchSpace::new(frame, cfg.dilate_dim)?;
    let n = space.dim();
    if let Some(w) = warm {
        if w.shape() != (n, n) {
            return Err(QestimError::validation(format!("warm start must be {n}x{n}")));
        }
    }
    let gm = g.matrix().clone();
    let results: Vec<RestartResult> = (0..cfg.restarts)
        .into_par_iter()
        .map(|index| {
            let mut rng = restart_rng(cfg.seed, index);
            let start = match (index, warm) {
                (0, Some(w)) => w.clone(),
                _ => random_unitary(n, &mut rng),
            };
            let (value, basis) = hill_climb(&space, &gm, cfg, tol, start, &mut rng);
            RestartResult { index, value, basis }
        })
        .collect();
    let mut trace = Vec::with_capacity(results.len());
    let mut running = f64::INFINITY;
    let mut winner: Option<&RestartResult> = None;
    for r in &results {
        if r.value < running {
            running = r.value;
            winner = Some(r);
        }
        trace.push((r.index, running));
    }
    let best = match winner {
        Some(r) => Some(space.estimator(&r.basis, g, tol)?),
        None => None,
    };
    Ok(OracleResult {
        best_value: running,
        best,
        best_restart: winner.map(|r| r.index),
        restart_values: results.iter().map(|r| r.value).collect(),
        trace,
        floor,
        dim: n,
    })
}

/// Absolute slack, scaled by `max(1, CR)`, allowed below a closed form.
pub const SOUNDNESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub oracle_best: f64,
    pub cr_value: f64,
    pub gap_above: f64,
    pub relative_gap: f64,
    pub floor: f64,
    pub floor_violation: bool,
}

/// Compares an oracle run with a closed form. A value below the closed form
/// is a fatal inconsistency.
pub fn verify_bound(closed: &BoundResult, oracle: &OracleResult) -> Result<VerifyReport> {
    let gap = oracle.best_value - closed.cr_value;
    let slack = SOUNDNESS_TOL * closed.cr_value.abs().max(1.0);
    let floor_violation = oracle.best_value < oracle.floor - slack;
    if gap < -slack || floor_violation {
        return Err(QestimError::internal(format!(
            "oracle value {} undercuts the closed form {} (floor {})",
            oracle.best_value, closed.cr_value, oracle.floor
        )));
    }
    Ok(VerifyReport {
        oracle_best: oracle.best_value,
        cr_value: closed.cr_value,
        gap_above: gap,
        relative_gap: gap / closed.cr_value.abs().max(f64::MIN_POSITIVE),
        floor: oracle.floor,
        floor_violation,
    })
}

/// Basis of the search space realizing a PVM built in the same embedding,
/// for use as a warm start.
pub fn warm_start_basis(pvm: &PvmEstimator) -> Result<CMatrix> {
    pvm.basis()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::cr_two_param;
    use crate::geometry::info_geometry;
    use crate::measurements::optimal_measurement_frame;
    use crate::models::zoo;
    use crate::operators::max_abs;

    fn quick(seed: u64) -> SearchConfig {
        SearchConfig { restarts: 8, local_steps: 600, seed, ..Default::default() }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(5, &mut rng);
        assert!(max_abs(&(u.adjoint() * &u - CMatrix::identity(5, 5))) < 1e-12);
        let mut v = u.clone();
        givens(&mut v, 1, 3, 0.4, 1.1);
        assert!(max_abs(&(v.adjoint() * &v - CMatrix::identity(5, 5))) < 1e-12);
    }

    #[test]
    fn one_parameter_qubit_reaches_floor() {
        let m = zoo::qubit_great_circle();
        let r = oracle_min_weighted_variance(&m, &[0.7], &WeightMatrix::identity(1), &quick(1)).unwrap();
        assert!(r.best_value <= r.floor * (1.0 + 1e-6), "{} vs {}", r.best_value, r.floor);
        assert!(r.best_value >= r.floor * (1.0 - 1e-9));
    }

    #[test]
    fn deterministic_under_seed() {
        let m = zoo::spin_coherent(0.5, 0.5, 1.0).unwrap();
        let g = WeightMatrix::identity(2);
        let a = oracle_min_weighted_variance(&m, &[1.0, 0.2], &g, &quick(9)).unwrap();
        let b = oracle_min_weighted_variance(&m, &[1.0, 0.2], &g, &quick(9)).unwrap();
        assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
        assert_eq!(a.restart_values, b.restart_values);
    }

    #[test]
    fn warm_start_has_zero_gap() {
        let model = zoo::synthetic_blocks(&[0.6]).unwrap();
        let frame = tangent_frame(&model, &[0.0, 0.0]).unwrap();
        let g = WeightMatrix::identity(2);
        let plan = optimal_measurement_frame(&frame, &g, &Tolerances::default()).unwrap();
        let warm = warm_start_basis(&plan.pvm).unwrap();
        let cfg = SearchConfig { restarts: 1, local_steps: 0, ..Default::default() };
        let r = oracle_frame(&frame, &g, &cfg, Some(&warm), &Tolerances::default()).unwrap();
        let closed = cr_two_param(&info_geometry(&frame).unwrap(), &g).unwrap();
        let rep = verify_bound(&closed, &r).unwrap();
        assert!(rep.gap_above.abs() < 1e-8, "gap {}", rep.gap_above);
    }

    #[test]
    fn undercut_is_fatal() {
        let model = zoo::synthetic_blocks(&[0.6]).unwrap();
        let frame = tangent_frame(&model, &[0.0, 0.0]).unwrap();
        let g = WeightMatrix::identity(2);
        let closed = cr_two_param(&info_geometry(&frame).unwrap(), &g).unwrap();
        let fake = OracleResult {
            best_value: closed.cr_value - 1e-3,
            best: None,
            best_restart: None,
            restart_values: vec![],
            trace: vec![],
            floor: 2.0,
            dim: 5,
        };
        assert!(matches!(verify_bound(&closed, &fake), Err(QestimError::InternalConsistency(_))));
    }
}
