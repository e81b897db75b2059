//! Closed-form attainable bounds.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{decompose_direct_sum, geometry_from_matrices, InfoGeometry};
use crate::operators::{max_abs_real, real_symmetric_eigen, real_symmetric_map};
use crate::{QestimError, RMatrix, Result, Tolerances};

/// Symmetric positive semidefinite weight.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    g: RMatrix,
    strict: bool,
}

impl WeightMatrix {
    pub fn new(g: RMatrix) -> Result<Self> {
        if !g.is_square() || g.nrows() == 0 {
            return Err(QestimError::validation("weight matrix must be square and nonempty"));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(QestimError::validation("weight matrix has non-finite entries"));
        }
        let scale = max_abs_real(&g).max(1.0);
        let asym = max_abs_real(&(&g - g.transpose()));
        if asym > 1e-12 * scale {
            return Err(QestimError::validation(format!("weight matrix is not symmetric ({asym:.3e})")));
        }
        let g = &g * 0.5 + g.transpose() * 0.5;
        let (vals, _) = real_symmetric_eigen(&g);
        let min = vals[0];
        let max = *vals.last().unwrap();
        if min < -1e-12 * scale {
            return Err(QestimError::validation(format!("weight matrix is not positive semidefinite (eigenvalue {min:.3e})")));
        }
        let strict = min > 1e-12 * max.max(f64::MIN_POSITIVE) && max > 0.0;
        Ok(WeightMatrix { g, strict })
    }

    pub fn identity(m: usize) -> Self {
        WeightMatrix { g: RMatrix::identity(m, m), strict: true }
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.g
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.g * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attained {
    Attained,
    InfimumOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sld,
    TwoParam,
    Coherent,
    GeneralJs,
    DirectSum,
    /// `[floor, upper]` interval, no closed form.
    Interval,
}

#[derive(Debug, Clone)]
pub struct BoundResult {
    pub cr_value: f64,
    pub v_opt: Option<RMatrix>,
    pub lambda: Option<RMatrix>,
    pub attained: Attained,
    pub method: Method,
    pub g: RMatrix,
    /// Upper end of the interval for [`Method::Interval`].
    pub upper: Option<f64>,
    pub note: Option<String>,
}

impl BoundResult {
    fn new(cr_value: f64, method: Method, g: &RMatrix) -> Self {
        BoundResult {
            cr_value,
            v_opt: None,
            lambda: None,
            attained: Attained::Attained,
            method,
            g: g.clone(),
            upper: None,
            note: None,
        }
    }
}

fn check_dims(geom: &InfoGeometry, g: &WeightMatrix) -> Result<()> {
    if g.dim() != geom.m() {
        return Err(QestimError::validation(format!(
            "weight matrix is {}x{} but the model has {} parameters",
            g.dim(),
            g.dim(),
            geom.m()
        )));
    }
    Ok(())
}

/// `Tr G J^{S−1}`.
pub fn sld_floor(geom: &InfoGeometry, g: &WeightMatrix) -> Result<f64> {
    check_dims(geom, g)?;
    Ok((g.matrix() * geom.js_inverse()?).trace())
}

/// `J^{S−1}` and whether it is attainable.
#[derive(Debug, Clone)]
pub struct SldBound {
    pub inverse: RMatrix,
    pub attainable: bool,
}

pub fn sld_bound(geom: &InfoGeometry) -> Result<SldBound> {
    Ok(SldBound { inverse: geom.js_inverse()?, attainable: geom.flags.quasi_classical || geom.m() == 1 })
}

fn quasi_classical_bound(geom: &InfoGeometry, g: &WeightMatrix) -> Result<BoundResult> {
    let inv = geom.js_inverse()?;
    let mut r = BoundResult::new((g.matrix() * &inv).trace(), Method::Sld, g.matrix());
    r.v_opt = Some(inv);
    r.lambda = Some(RMatrix::zeros(geom.m(), geom.m()));
    Ok(r)
}

/// Lagrange residuals `GVG − ΛVΛ − GVJ^SVG` and `GVΛ + ΛVG + GVJ̃VG`, each
/// relative to the largest of its terms.
pub fn lagrange_residuals(geom: &InfoGeometry, g: &RMatrix, v: &RMatrix, lambda: &RMatrix) -> (f64, f64) {
    let gv = g * v;
    let gvg = &gv * g;
    let lvl = lambda * v * lambda;
    let gvjvg = &gv * &geom.js * v * g;
    let gvl = &gv * lambda;
    let gvtvg = &gv * &geom.jtilde * v * g;
    let s1 = max_abs_real(&gvg).max(max_abs_real(&lvl)).max(max_abs_real(&gvjvg)).max(1e-300);
    let s2 = max_abs_real(&gvl).max(max_abs_real(&gvtvg)).max(max_abs_real(&gvg)).max(1e-300);
    let r1 = gvg - lvl - gvjvg;
    let r2 = &gvl + lambda * v * g + gvtvg;
    (max_abs_real(&r1) / s1, max_abs_real(&r2) / s2)
}

pub const LAGRANGE_TOL: f64 = 1e-8;
/// `|β|` within this of 1 is treated as 1.
pub const UNIT_BETA_TOL: f64 = 1e-6;

/// `1 − |β|` below which `|β|` is rounded to 1 in the two-parameter form.
pub const BETA_ROUNDING: f64 = 8.0 * f64::EPSILON;

/// Minimizes `g₁ sec²p + g₂ sec²(γ − p)` over `p ∈ [0, γ]`.
fn minimize_on_curve(g1: f64, g2: f64, gamma: f64) -> f64 {
    let df = |p: f64| {
        let q = gamma - p;
        let (c1, c2) = (p.cos(), q.cos());
        2.0 * g1 * p.tan() / (c1 * c1) - 2.0 * g2 * q.tan() / (c2 * c2)
    };
    let d2f = |p: f64| {
        let q = gamma - p;
        let (t1, t2) = (p.tan(), q.tan());
        let (s1, s2) = (1.0 / (p.cos() * p.cos()), 1.0 / (q.cos() * q.cos()));
        2.0 * g1 * s1 * (1.0 + 3.0 * t1 * t1) + 2.0 * g2 * s2 * (1.0 + 3.0 * t2 * t2)
    };
    let (mut lo, mut hi) = (0.0, gamma);
    let mut p = gamma * g2 / (g1 + g2);
    for _ in 0..200 {
        let d = df(p);
        if d > 0.0 {
            hi = p;
        } else {
            lo = p;
        }
        if d == 0.0 || hi - lo <= 1e-16 * gamma.max(1.0) {
            break;
        }
        let step = d / d2f(p);
        if step.abs() <= 4.0 * f64::EPSILON * p.abs().max(1e-300) {
            break;
        }
        let next = p - step;
        p = if next > lo && next < hi && step.is_finite() { next } else { 0.5 * (lo + hi) };
    }
    p
}

/// Exact two-parameter bound.
pub fn cr_two_param(geom: &InfoGeometry, g: &WeightMatrix) -> Result<BoundResult> {
    if geom.m() != 2 {
        return Err(QestimError::validation(format!("cr_two_param needs m = 2, got {}", geom.m())));
    }
    check_dims(geom, g)?;
    let s = geom.js_inv_sqrt();
    let s_inv = geom.js_sqrt();
    let gn = &s * g.matrix() * &s;
    let jt = geom.normalized_jtilde();
    // rotate so that the normalized weight is diag(g1, g2), g1 >= g2
    let (vals, mut r) = real_symmetric_eigen(&gn);
    let (g1, g2) = (vals[1].max(0.0), vals[0].max(0.0));
    r.swap_columns(0, 1);
    if r.determinant() < 0.0 {
        r.set_column(1, &(-r.column(1)));
    }
    let jr = r.transpose() * &jt * &r;
    let beta = jr[(1, 0)];
    // |β| within rounding of 1 is exactly 1; asin would amplify the residue to √ε
    let abeta = if beta.abs() >= 1.0 - BETA_ROUNDING { 1.0 } else { beta.abs() };
    let finish = |u: f64, v: f64, mu: f64| -> (RMatrix, RMatrix) {
        let vd = RMatrix::from_row_slice(2, 2, &[u, 0.0, 0.0, v]);
        let ld = RMatrix::from_row_slice(2, 2, &[0.0, -mu, mu, 0.0]);
        let vn = &r * vd * r.transpose();
        let ln = &r * ld * r.transpose();
        (&s * vn * &s, &s_inv * ln * &s_inv)
    };

    if abeta <= 1e-14 || geom.flags.quasi_classical {
        let mut res = quasi_classical_bound(geom, g)?;
        res.method = Method::TwoParam;
        return Ok(res);
    }
    if g1 <= 0.0 {
        let mut res = BoundResult::new(0.0, Method::TwoParam, g.matrix());
        res.note = Some("zero weight".into());
        res.attained = Attained::InfimumOnly;
        return Ok(res);
    }
    let rank_one = g2 <= 1e-12 * g1;
    if rank_one {
        if abeta >= 1.0 - UNIT_BETA_TOL {
            let mut res = BoundResult::new(g1, Method::TwoParam, g.matrix());
            res.attained = Attained::InfimumOnly;
            res.note = Some("rank-one weight with |β| = 1: the infimum is approached but not attained".into());
            return Ok(res);
        }
        let u = 1.0;
        let v = 1.0 / (1.0 - abeta * abeta);
        let (vo, lo) = finish(u, v, 0.0);
        let mut res = BoundResult::new(g1 * u, Method::TwoParam, g.matrix());
        res.v_opt = Some(vo);
        res.lambda = Some(lo);
        return Ok(res);
    }
    let gamma = abeta.asin();
    let p = minimize_on_curve(g1, g2, gamma);
    let u = 1.0 / p.cos().powi(2);
    let v = 1.0 / (gamma - p).cos().powi(2);
    let gr = g2 / g1;
    let lam = -u * v * beta * gr / (v * gr + u);
    let mu = g1 * lam;
    let value = g1 * u + g2 * v;
    let (vo, lo) = finish(u, v, mu);
    let (r1, r2) = lagrange_residuals(geom, g.matrix(), &vo, &lo);
    if r1 > LAGRANGE_TOL || r2 > LAGRANGE_TOL {
        return Err(QestimError::internal(format!("two-parameter Lagrange residuals ({r1:.3e}, {r2:.3e}) exceed {LAGRANGE_TOL:e}")));
    }
    let mut res = BoundResult::new(value, Method::TwoParam, g.matrix());
    res.v_opt = Some(vo);
    res.lambda = Some(lo);
    Ok(res)
}

/// `Tr |A|` and `|A| = (AAᵀ)^{1/2}` of a real matrix.
fn abs_matrix(a: &RMatrix) -> RMatrix {
    real_symmetric_map(&(a * a.transpose()), |x| x.max(0.0).sqrt())
}

/// Closed form for coherent models.
pub fn cr_coherent(geom: &InfoGeometry, g: &WeightMatrix) -> Result<BoundResult> {
    check_dims(geom, g)?;
    if !geom.flags.coherent {
        return Err(QestimError::NotCoherent(format!("β-spectrum {:?}", geom.beta_spectrum)));
    }
    let inv = geom.js_inverse()?;
    let a = &inv * &geom.jtilde * &inv;
    let gh = real_symmetric_map(g.matrix(), |x| x.max(0.0).sqrt());
    let b = &gh * &a * &gh;
    let absb = abs_matrix(&b);
    let value = (g.matrix() * &inv).trace() + absb.trace();
    let mut res = BoundResult::new(value, Method::Coherent, g.matrix());
    if g.is_strict() {
        let ghi = real_symmetric_map(g.matrix(), |x| 1.0 / x.sqrt());
        res.v_opt = Some(&inv + &ghi * absb * &ghi);
    } else {
        res.attained = Attained::InfimumOnly;
        res.note = Some("singular weight: value is an infimum".into());
    }
    Ok(res)
}

/// `Σ_α 2/(1 + √(1 − |α|²))` over the eigenvalues of `J^{S−1}J̃`, with `G = J^S`.
pub fn cr_general_js(geom: &InfoGeometry) -> Result<BoundResult> {
    let value: f64 = geom.alpha_moduli().iter().map(|&a| 2.0 / (1.0 + (1.0 - a.min(1.0) * a.min(1.0)).sqrt())).sum();
    let mut res = BoundResult::new(value, Method::GeneralJs, &geom.js);
    let ds = decompose_direct_sum(geom)?;
    let m = geom.m();
    let mut ve = RMatrix::zeros(m, m);
    for b in &ds.blocks {
        let w = 2.0 / (1.0 + (1.0 - b.beta.min(1.0).powi(2)).sqrt());
        for &c in &b.coords {
            ve[(c, c)] = if b.coords.len() == 2 { w } else { 1.0 };
        }
    }
    res.v_opt = Some(&ds.from_block * ve * ds.from_block.transpose());
    Ok(res)
}

/// Off-block mass above which a weight is said to couple blocks.
pub const BLOCK_COUPLING_TOL: f64 = 1e-10;

/// Sum of per-block bounds for a weight that is block diagonal in the
/// direct-sum coordinates.
pub fn cr_direct_sum(geom: &InfoGeometry, g: &WeightMatrix) -> Result<BoundResult> {
    check_dims(geom, g)?;
    let ds = decompose_direct_sum(geom)?;
    let m = geom.m();
    let gb = ds.from_block.transpose() * g.matrix() * &ds.from_block;
    let mut owner = vec![0usize; m];
    for (k, b) in ds.blocks.iter().enumerate() {
        for &c in &b.coords {
            owner[c] = k;
        }
    }
    let scale = max_abs_real(&gb).max(f64::MIN_POSITIVE);
    let mut mass = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            if owner[i] != owner[j] {
                mass = mass.max(gb[(i, j)].abs());
            }
        }
    }
    if mass > BLOCK_COUPLING_TOL * scale {
        return Err(QestimError::BlockCoupling { mass: mass / scale });
    }
    let mut total = 0.0;
    let mut vb = RMatrix::zeros(m, m);
    let mut lb = RMatrix::zeros(m, m);
    let mut attained = Attained::Attained;
    let mut have_v = true;
    for b in &ds.blocks {
        let c = &b.coords;
        if c.len() == 1 {
            let gi = gb[(c[0], c[0])];
            total += gi;
            vb[(c[0], c[0])] = 1.0;
            continue;
        }
        let sub_g = RMatrix::from_fn(2, 2, |i, j| gb[(c[i], c[j])]);
        let sub_jt = RMatrix::from_fn(2, 2, |i, j| ds.canonical[(c[i], c[j])]);
        let sub = geometry_from_matrices(RMatrix::identity(2, 2), sub_jt, geom.pure, &Tolerances::default())?;
        let w = WeightMatrix::new((&sub_g + sub_g.transpose()) * 0.5)?;
        let r = cr_two_param(&sub, &w)?;
        total += r.cr_value;
        if r.attained == Attained::InfimumOnly {
            attained = Attained::InfimumOnly;
        }
        match (r.v_opt, r.lambda) {
            (Some(v), Some(l)) => {
                for i in 0..2 {
                    for j in 0..2 {
                        vb[(c[i], c[j])] = v[(i, j)];
                        lb[(c[i], c[j])] = l[(i, j)];
                    }
                }
            }
            _ => have_v = false,
        }
    }
    let mut res = BoundResult::new(total, Method::DirectSum, g.matrix());
    res.attained = attained;
    if have_v {
        res.v_opt = Some(&ds.from_block * vb * ds.from_block.transpose());
        res.lambda = Some(ds.to_block.transpose() * lb * &ds.to_block);
    }
    Ok(res)
}

/// Picks the closed form that applies, or falls back to an interval whose
/// lower end is the SLD floor.
pub fn auto_bound(geom: &InfoGeometry, g: &WeightMatrix) -> Result<BoundResult> {
    check_dims(geom, g)?;
    if geom.flags.quasi_classical {
        return quasi_classical_bound(geom, g);
    }
    if geom.m() == 2 {
        return cr_two_param(geom, g);
    }
    if geom.flags.coherent {
        return cr_coherent(geom, g);
    }
    match cr_direct_sum(geom, g) {
        Ok(r) => Ok(r),
        Err(QestimError::BlockCoupling { mass }) => {
            let mut r = BoundResult::new(sld_floor(geom, g)?, Method::Interval, g.matrix());
            r.attained = Attained::InfimumOnly;
            r.note = Some(format!("no closed form (weight couples blocks, mass {mass:.3e}); value is the SLD floor"));
            Ok(r)
        }
        Err(e) => Err(e),
    }
}

/// `4/(1 + √(1 − β²))`.
pub fn two_param_js_value(beta: f64) -> f64 {
    4.0 / (1.0 + (1.0 - beta * beta).max(0.0).sqrt())
}

// ---------------------------------------------------------------------------
// boundary of the covariance region

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Curve,
    LinePlus,
    LineMinus,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Curve => "curve",
            Branch::LinePlus => "line_plus",
            Branch::LineMinus => "line_minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub beta: f64,
    pub x: f64,
    pub z: f64,
    pub branch: Branch,
}

/// `|x|` at which the curve meets the half-lines, `β²/(2(1 − β²))`.
pub fn curve_endpoint(beta: f64) -> f64 {
    let b2 = beta * beta;
    b2 / (2.0 * (1.0 - b2))
}

/// Left side minus right side of the boundary equation.
fn boundary_residual(beta: f64, x: f64, z: f64) -> f64 {
    let a = (z + x - 1.0).max(0.0).sqrt();
    let b = (z - x - 1.0).max(0.0).sqrt();
    beta * a * b + (1.0 - beta * beta).max(0.0).sqrt() * (a + b) - beta
}

/// Solves the boundary equation for `z` at `x` by bisection.
pub fn boundary_z(beta: f64, x: f64) -> Result<f64> {
    check_beta(beta)?;
    let beta = beta.abs();
    if beta < 1.0 && x.abs() > curve_endpoint(beta) * (1.0 + 1e-12) {
        return Err(QestimError::validation(format!("x = {x} is outside the curve's range for β = {beta}")));
    }
    let mut lo = 1.0 + x.abs();
    if boundary_residual(beta, x, lo) >= 0.0 {
        // at an endpoint, up to rounding
        return Ok(lo);
    }
    let mut hi = lo + 1.0;
    while boundary_residual(beta, x, hi) < 0.0 {
        hi = lo + 2.0 * (hi - lo);
        if hi > 1e300 {
            return Err(QestimError::internal("boundary bisection failed to bracket"));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if boundary_residual(beta, x, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta.abs()) || !beta.is_finite() {
        return Err(QestimError::validation(format!("β must lie in [0, 1], got {beta}")));
    }
    Ok(())
}

/// `z` at `x = 0` in closed form, `1 + (1 − √(1 − β²))²/β²`.
pub fn boundary_z_at_zero(beta: f64) -> f64 {
    if beta == 0.0 {
        return 1.0;
    }
    let c = (1.0 - beta * beta).sqrt();
    1.0 + (1.0 - c).powi(2) / (beta * beta)
}

/// Default half-width of the `x` range drawn for `β = 1`.
pub const UNIT_BETA_X_RANGE: f64 = 4.0;

/// Samples the curve and the two half-lines. For `β = 1` the curve is the
/// hyperbola `z = 1 + √(1 + x²)` over `|x| ≤ x_range` and there are no
/// half-lines.
pub fn boundary_curve(beta: f64, samples: usize, x_range: Option<f64>) -> Result<Vec<BoundaryPoint>> {
    check_beta(beta)?;
    if samples < 2 {
        return Err(QestimError::validation("samples must be at least 2"));
    }
    let beta = beta.abs();
    let mut out = Vec::with_capacity(samples + 4);
    if beta == 0.0 {
        out.push(BoundaryPoint { beta, x: 0.0, z: 1.0, branch: Branch::Curve });
    } else {
        let xe = if beta >= 1.0 { x_range.unwrap_or(UNIT_BETA_X_RANGE) } else { curve_endpoint(beta) };
        for k in 0..samples {
            let x = if k + 1 == samples { xe } else { -xe + 2.0 * xe * k as f64 / (samples - 1) as f64 };
            let z = if beta >= 1.0 { 1.0 + (1.0 + x * x).sqrt() } else { boundary_z(beta, x)? };
            out.push(BoundaryPoint { beta, x, z, branch: Branch::Curve });
        }
    }
    if beta < 1.0 {
        let xe = curve_endpoint(beta);
        let far = xe + x_range.unwrap_or(2.0 * xe + 1.0);
        for &x in &[xe, far] {
            out.push(BoundaryPoint { beta, x, z: x + 1.0, branch: Branch::LinePlus });
        }
        for &x in &[-xe, -far] {
            out.push(BoundaryPoint { beta, x, z: -x + 1.0, branch: Branch::LineMinus });
        }
    }
    Ok(out)
}

/// CSV with header `beta,x,z,branch` and round-trip float formatting.
pub fn boundary_csv(points: &[BoundaryPoint]) -> String {
    let mut s = String::from("beta,x,z,branch\n");
    for p in points {
        let _ = writeln!(s, "{:?},{:?},{:?},{}", p.beta, p.x, p.z, p.branch.as_str());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(beta: f64) -> InfoGeometry {
        let jt = RMatrix::from_row_slice(2, 2, &[0.0, -beta, beta, 0.0]);
        geometry_from_matrices(RMatrix::identity(2, 2), jt, true, &Tolerances::default()).unwrap()
    }

    #[test]
    fn js_weight_two_param() {
        let r = cr_two_param(&geom(0.6), &WeightMatrix::identity(2)).unwrap();
        assert!((r.cr_value - 4.0 / 1.8).abs() < 1e-12);
        assert_eq!(r.attained, Attained::Attained);
    }

    #[test]
    fn coherent_diag_weight() {
        let g = WeightMatrix::new(RMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0])).unwrap();
        let r = cr_two_param(&geom(1.0), &g).unwrap();
        assert!((r.cr_value - 9.0).abs() < 1e-10, "{}", r.cr_value);
        let v = r.v_opt.unwrap();
        assert!((v[(0, 0)] - 3.0).abs() < 1e-8 && (v[(1, 1)] - 1.5).abs() < 1e-8, "{v}");
        let c = cr_coherent(&geom(1.0), &g).unwrap();
        assert!((c.cr_value - 9.0).abs() < 1e-12);
    }

    #[test]
    fn quasi_classical_floor() {
        let g = WeightMatrix::new(RMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let r = cr_two_param(&geom(0.0), &g).unwrap();
        assert!((r.cr_value - 3.0).abs() < 1e-14);
        assert_eq!(r.v_opt.unwrap(), RMatrix::identity(2, 2));
    }

    #[test]
    fn rank_one_weight() {
        let g = WeightMatrix::new(RMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(!g.is_strict());
        let r = cr_two_param(&geom(0.6), &g).unwrap();
        assert_eq!(r.attained, Attained::Attained);
        assert!((r.cr_value - 1.0).abs() < 1e-14);
        let r = cr_two_param(&geom(1.0), &g).unwrap();
        assert_eq!(r.attained, Attained::InfimumOnly);
    }

    #[test]
    fn general_js_values() {
        assert!((cr_general_js(&geom(0.6)).unwrap().cr_value - 4.0 / 1.8).abs() < 1e-12);
        let mut jt = RMatrix::zeros(4, 4);
        jt[(0, 1)] = -1.0;
        jt[(1, 0)] = 1.0;
        jt[(2, 3)] = -0.5;
        jt[(3, 2)] = 0.5;
        let g = geometry_from_matrices(RMatrix::identity(4, 4), jt, true, &Tolerances::default()).unwrap();
        let expect = 4.0 + 4.0 / (1.0 + 0.75f64.sqrt());
        assert!((cr_general_js(&g).unwrap().cr_value - expect).abs() < 1e-12);
        assert!((cr_direct_sum(&g, &WeightMatrix::identity(4)).unwrap().cr_value - expect).abs() < 1e-9);
    }

    #[test]
    fn direct_sum_independent_blocks() {
        let mut jt = RMatrix::zeros(4, 4);
        jt[(0, 1)] = -0.6;
        jt[(1, 0)] = 0.6;
        let g = geometry_from_matrices(RMatrix::identity(4, 4), jt, true, &Tolerances::default()).unwrap();
        let r = cr_direct_sum(&g, &WeightMatrix::identity(4)).unwrap();
        assert!((r.cr_value - (4.0 / 1.8 + 2.0)).abs() < 1e-9);
    }

    #[test]
    fn coupling_weight_refused() {
        let mut jt = RMatrix::zeros(4, 4);
        jt[(0, 1)] = -0.6;
        jt[(1, 0)] = 0.6;
        jt[(2, 3)] = -0.3;
        jt[(3, 2)] = 0.3;
        let g = geometry_from_matrices(RMatrix::identity(4, 4), jt, true, &Tolerances::default()).unwrap();
        let mut w = RMatrix::identity(4, 4);
        w[(0, 2)] = 0.3;
        w[(2, 0)] = 0.3;
        let e = cr_direct_sum(&g, &WeightMatrix::new(w.clone()).unwrap()).unwrap_err();
        assert!(matches!(e, QestimError::BlockCoupling { .. }));
        let r = auto_bound(&g, &WeightMatrix::new(w).unwrap()).unwrap();
        assert_eq!(r.method, Method::Interval);
    }

    #[test]
    fn boundary_at_zero() {
        for k in 1..10 {
            let b = k as f64 / 10.0;
            let z = boundary_z(b, 0.0).unwrap();
            assert!((z - boundary_z_at_zero(b)).abs() < 1e-12);
            assert!((2.0 * z - two_param_js_value(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_endpoints_meet_lines() {
        let pts = boundary_curve(0.8, 100, None).unwrap();
        let curve: Vec<_> = pts.iter().filter(|p| p.branch == Branch::Curve).collect();
        assert_eq!(curve.len(), 100);
        let last = curve.last().unwrap();
        assert!((last.x - 8.0 / 9.0).abs() < 1e-12);
        assert!((last.z - 1.0 - last.x).abs() < 1e-9);
        assert!(boundary_z(0.8, 16.0 / 9.0).is_err());
    }

    #[test]
    fn boundary_degenerate() {
        let pts = boundary_curve(0.0, 10, None).unwrap();
        assert_eq!(pts[0].z, 1.0);
        assert!(boundary_curve(1.5, 10, None).is_err());
    }

    #[test]
    fn csv_header() {
        let csv = boundary_csv(&boundary_curve(0.5, 3, None).unwrap());
        assert!(csv.starts_with("beta,x,z,branch\n"));
        assert_eq!(csv.lines().count(), 1 + 3 + 4);
    }
}
