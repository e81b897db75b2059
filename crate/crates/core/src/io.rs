//! Machine-readable reports, text rendering and weight-file parsing.
//!
//! Every report is a plain serde struct. [`emit_json`] validates a report,
//! serializes it, parses the text back and validates again, so anything
//! written to disk is known to re-load. JSON floats use shortest round-trip
//! formatting; text output uses 9 significant digits.

use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bounds::{sld_floor, Attained, BoundResult, Method, WeightMatrix};
use crate::geometry::{coherency_det_check, decompose_direct_sum, Block, Flags, InfoGeometry, BETA_PAIR_TOL};
use crate::measurements::{Ambient, MeasurementPlan, PVM_TOL};
use crate::operators::{matrix_to_pairs, max_abs_real, pairs_to_matrix, real_matrix_to_rows, rows_to_real_matrix};
use crate::oracle::{OracleResult, SearchConfig, VerifyReport};
use crate::simulate::{QmleConfig, QmleRun, TestPowerReport};
use crate::{CMatrix, QestimError, RMatrix, Result};

/// Significant digits in text output.
pub const TEXT_DIGITS: usize = 9;

/// Formats `x` with nine significant digits. Moderate magnitudes use fixed
/// notation, everything else scientific.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", TEXT_DIGITS - 1, x);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap_or(0);
    if (-4..9).contains(&exp) {
        let decimals = (TEXT_DIGITS as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

pub fn sig9_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "inf".into(), sig9)
}

pub fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| sig9(x)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn fmt_rows(rows: &[Vec<f64>]) -> String {
    let parts: Vec<String> = rows.iter().map(|r| fmt_vec(r)).collect();
    format!("[{}]", parts.join(", "))
}

/// A report that can be validated, rendered as text and round-tripped.
pub trait Report: Serialize + DeserializeOwned {
    fn validate(&self) -> Result<()>;
    fn to_text(&self) -> String;
}

/// Validates, serializes, re-parses and re-validates. The re-parsed report
/// must serialize to the same bytes.
pub fn emit_json<R: Report>(report: &R) -> Result<String> {
    report.validate()?;
    let text = serde_json::to_string_pretty(report).map_err(QestimError::from)?;
    let back: R = parse_report(&text)?;
    let again = serde_json::to_string_pretty(&back).map_err(QestimError::from)?;
    if again != text {
        return Err(QestimError::internal("report does not survive a JSON round trip"));
    }
    Ok(text)
}

pub fn parse_report<R: Report>(text: &str) -> Result<R> {
    let r: R = serde_json::from_str(text)?;
    r.validate()?;
    Ok(r)
}

fn bad(what: impl Into<String>) -> QestimError {
    QestimError::validation(what.into())
}

fn finite(name: &str, xs: impl IntoIterator<Item = f64>) -> Result<()> {
    if xs.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(bad(format!("{name}: non-finite entry")))
    }
}

fn square(name: &str, rows: &[Vec<f64>], m: usize) -> Result<RMatrix> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(bad(format!("{name}: expected a {m}x{m} matrix")));
    }
    finite(name, rows.iter().flatten().copied())?;
    rows_to_real_matrix(rows)
}

fn symmetric(name: &str, a: &RMatrix, sign: f64) -> Result<()> {
    let dev = max_abs_real(&(a - a.transpose() * sign));
    if dev > 1e-9 * max_abs_real(a).max(1.0) {
        return Err(bad(format!("{name}: symmetry defect {dev:.3e}")));
    }
    Ok(())
}

fn rows(a: &RMatrix) -> Vec<Vec<f64>> {
    real_matrix_to_rows(a)
}

// ---------------------------------------------------------------------------
// geometry

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryReport {
    pub kind: String,
    pub theta: Vec<f64>,
    pub pure: bool,
    pub js: Vec<Vec<f64>>,
    pub jtilde: Vec<Vec<f64>>,
    pub beta_spectrum: Vec<f64>,
    pub zero_modes: usize,
    pub flags: Flags,
    pub det_js: f64,
    pub det_jtilde: f64,
    /// Whether `|det J^S| = |det J̃|` to the determinant-check tolerance.
    pub det_equal: bool,
    pub blocks: Vec<Block>,
}

impl GeometryReport {
    pub fn new(kind: &str, theta: &[f64], geom: &InfoGeometry) -> Result<Self> {
        let det = coherency_det_check(geom);
        let blocks = decompose_direct_sum(geom)?.blocks;
        Ok(GeometryReport {
            kind: kind.into(),
            theta: theta.to_vec(),
            pure: geom.pure,
            js: rows(&geom.js),
            jtilde: rows(&geom.jtilde),
            beta_spectrum: geom.beta_spectrum.clone(),
            zero_modes: geom.zero_modes,
            flags: geom.flags,
            det_js: det.det_js,
            det_jtilde: det.det_jtilde,
            det_equal: det.coherent,
            blocks,
        })
    }
}

impl Report for GeometryReport {
    fn validate(&self) -> Result<()> {
        let m = self.theta.len();
        finite("theta", self.theta.iter().copied())?;
        let js = square("js", &self.js, m)?;
        let jt = square("jtilde", &self.jtilde, m)?;
        symmetric("js", &js, 1.0)?;
        symmetric("jtilde", &jt, -1.0)?;
        if 2 * self.beta_spectrum.len() + self.zero_modes != m {
            return Err(bad("beta_spectrum and zero_modes do not account for every parameter"));
        }
        finite("beta_spectrum", self.beta_spectrum.iter().copied())?;
        if self.beta_spectrum.iter().any(|&b| !(0.0..=1.0 + BETA_PAIR_TOL).contains(&b)) {
            return Err(bad("beta_spectrum: entries must lie in [0, 1]"));
        }
        finite("det", [self.det_js, self.det_jtilde])?;
        if self.blocks.iter().map(|b| b.coords.len()).sum::<usize>() != m {
            return Err(bad("blocks do not cover the parameter space"));
        }
        Ok(())
    }

    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model: {}", self.kind);
        let _ = writeln!(s, "theta: {}", fmt_vec(&self.theta));
        let _ = writeln!(s, "pure: {}", self.pure);
        let _ = writeln!(s, "JS: {}", fmt_rows(&self.js));
        let _ = writeln!(s, "Jtilde: {}", fmt_rows(&self.jtilde));
        let _ = writeln!(s, "beta_spectrum: {}", fmt_vec(&self.beta_spectrum));
        let _ = writeln!(s, "zero_modes: {}", self.zero_modes);
        let _ = writeln!(s, "quasi_classical: {}", self.flags.quasi_classical);
        let _ = writeln!(s, "coherent: {}", self.flags.coherent);
        let _ = writeln!(s, "|det JS|: {}", sig9(self.det_js));
        let _ = writeln!(s, "|det Jtilde|: {}", sig9(self.det_jtilde));
        let _ = writeln!(s, "det_equal: {}", self.det_equal);
        for b in &self.blocks {
            let _ = writeln!(s, "block {:?}: beta = {}", b.coords, sig9(b.beta));
        }
        s
    }
}

// ---------------------------------------------------------------------------
// bound

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundReport {
    pub kind: String,
    pub theta: Vec<f64>,
    pub method: Method,
    pub attained: Attained,
    pub cr_value: f64,
    /// `Tr G J^{S−1}`.
    pub floor: f64,
    /// Upper end of an interval; `None` for closed forms or an unbounded interval.
    pub upper: Option<f64>,
    pub g: Vec<Vec<f64>>,
    pub v_opt: Option<Vec<Vec<f64>>>,
    pub lambda: Option<Vec<Vec<f64>>>,
    pub note: Option<String>,
}

impl BoundReport {
    pub fn new(kind: &str, theta: &[f64], geom: &InfoGeometry, g: &WeightMatrix, b: &BoundResult) -> Result<Self> {
        Ok(BoundReport {
            kind: kind.into(),
            theta: theta.to_vec(),
            method: b.method,
            attained: b.attained,
            cr_value: b.cr_value,
            floor: sld_floor(geom, g)?,
            upper: b.upper.filter(|u| u.is_finite()),
            g: rows(&b.g),
            v_opt: b.v_opt.as_ref().map(rows),
            lambda: b.lambda.as_ref().map(rows),
            note: b.note.clone(),
        })
    }
}

impl Report for BoundReport {
    fn validate(&self) -> Result<()> {
        let m = self.theta.len();
        let g = square("g", &self.g, m)?;
        symmetric("g", &g, 1.0)?;
        WeightMatrix::new(g)?;
        if let Some(v) = &self.v_opt {
            symmetric("v_opt", &square("v_opt", v, m)?, 1.0)?;
        }
        if let Some(l) = &self.lambda {
            symmetric("lambda", &square("lambda", l, m)?, -1.0)?;
        }
        finite("cr_value", [self.cr_value, self.floor])?;
        let slack = 1e-9 * self.floor.abs().max(1.0);
        if self.cr_value < self.floor - slack {
            return Err(bad(format!("cr_value {} lies below the SLD floor {}", self.cr_value, self.floor)));
        }
        if let Some(u) = self.upper {
            if !u.is_finite() || u < self.cr_value - slack {
                return Err(bad("upper end of the interval lies below its lower end"));
            }
        }
        Ok(())
    }

    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "method: {}", serde_json::to_value(self.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
        let _ = writeln!(s, "attained: {}", self.attained == Attained::Attained);
        if self.method == Method::Interval {
            let _ = writeln!(s, "interval: [{}, {}]", sig9(self.cr_value), sig9_opt(self.upper));
        } else {
            let _ = writeln!(s, "CR: {}", sig9(self.cr_value));
        }
        let _ = writeln!(s, "SLD floor: {}", sig9(self.floor));
        if let Some(v) = &self.v_opt {
            let _ = writeln!(s, "V_opt: {}", fmt_rows(v));
        }
        if let Some(note) = &self.note {
            let _ = writeln!(s, "note: {note}");
        }
        s
    }
}

// ---------------------------------------------------------------------------
// measurement

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementReport {
    pub kind: String,
    pub theta: Vec<f64>,
    pub ambient: Ambient,
    pub method: Method,
    pub cr_value: f64,
    /// Projectors as rows of `[re, im]` pairs.
    pub projectors: Vec<Vec<Vec<[f64; 2]>>>,
    pub estimates: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
    pub fisher: Vec<Vec<f64>>,
    pub fisher_singular: bool,
    pub min_weighted_variance: f64,
}

impl MeasurementReport {
    pub fn new(kind: &str, plan: &MeasurementPlan) -> Self {
        MeasurementReport {
            kind: kind.into(),
            theta: plan.pvm.theta.clone(),
            ambient: plan.pvm.ambient,
            method: plan.bound.method,
            cr_value: plan.bound.cr_value,
            projectors: plan.pvm.projectors.iter().map(matrix_to_pairs).collect(),
            estimates: plan.pvm.estimates.iter().map(|e| e.iter().copied().collect()).collect(),
            probabilities: plan.distribution.p.clone(),
            fisher: rows(&plan.fisher.j),
            fisher_singular: plan.fisher.singular,
            min_weighted_variance: plan.min_weighted_variance,
        }
    }

    pub fn projector_matrices(&self) -> Result<Vec<CMatrix>> {
        self.projectors.iter().map(|p| pairs_to_matrix(p)).collect()
    }
}

impl Report for MeasurementReport {
    fn validate(&self) -> Result<()> {
        let m = self.theta.len();
        let k = self.projectors.len();
        if k == 0 || self.estimates.len() != k || self.probabilities.len() != k {
            return Err(bad("projectors, estimates and probabilities must have one entry per outcome"));
        }
        if self.estimates.iter().any(|e| e.len() != m) {
            return Err(bad(format!("estimates: expected {m} components each")));
        }
        finite("estimates", self.estimates.iter().flatten().copied())?;
        finite("probabilities", self.probabilities.iter().copied())?;
        finite("projectors", self.projectors.iter().flatten().flatten().flatten().copied())?;
        let ps = self.projector_matrices()?;
        let d = ps[0].nrows();
        if ps.iter().any(|p| p.nrows() != d || p.ncols() != d) {
            return Err(bad("projectors: inconsistent dimensions"));
        }
        if let Ambient::Dilated(dd) = self.ambient {
            if dd != d {
                return Err(bad(format!("ambient dimension {dd} differs from projector size {d}")));
            }
        }
        let sum = ps.iter().fold(CMatrix::zeros(d, d), |a, p| a + p);
        let defect = crate::operators::max_abs(&(sum - CMatrix::identity(d, d)));
        if defect > 1e3 * PVM_TOL {
            return Err(bad(format!("projectors are not complete (defect {defect:.3e})")));
        }
        if self.probabilities.iter().any(|&p| p < -1e-9) || (self.probabilities.iter().sum::<f64>() - 1.0).abs() > 1e-8 {
            return Err(bad("probabilities do not form a distribution"));
        }
        symmetric("fisher", &square("fisher", &self.fisher, m)?, 1.0)?;
        finite("values", [self.cr_value, self.min_weighted_variance])?;
        Ok(())
    }

    fn to_text(&self) -> String {
        let mut s = String::new();
        let d = self.projectors.first().map_or(0, |p| p.len());
        let amb = match self.ambient {
            Ambient::Base => format!("base space, dimension {d}"),
            Ambient::Dilated(n) => format!("dilated space, dimension {n}"),
        };
        let _ = writeln!(s, "ambient: {amb}");
        let _ = writeln!(s, "outcomes: {}", self.projectors.len());
        let _ = writeln!(s, "CR: {}", sig9(self.cr_value));
        let _ = writeln!(s, "min Tr GV: {}", sig9(self.min_weighted_variance));
        let _ = writeln!(s, "J_M: {}", fmt_rows(&self.fisher));
        for (k, (p, e)) in self.probabilities.iter().zip(&self.estimates).enumerate() {
            let _ = writeln!(s, "outcome {k}: p = {}, estimate = {}", sig9(*p), fmt_vec(e));
        }
        s
    }
}

// ---------------------------------------------------------------------------
// oracle

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleReport {
    pub kind: String,
    pub theta: Vec<f64>,
    pub restarts: usize,
    pub local_steps: usize,
    pub seed: u64,
    pub dim: usize,
    /// `None` when every restart ended on a singular Fisher matrix.
    pub best_value: Option<f64>,
    pub best_restart: Option<usize>,
    pub floor: f64,
    pub restart_values: Vec<Option<f64>>,
    /// Closed-form value, when one applies.
    pub cr_value: Option<f64>,
    pub gap_above: Option<f64>,
    pub relative_gap: Option<f64>,
}

impl OracleReport {
    pub fn new(kind: &str, theta: &[f64], cfg: &SearchConfig, r: &OracleResult, verify: Option<&VerifyReport>) -> Self {
        let fin = |x: f64| x.is_finite().then_some(x);
        OracleReport {
            kind: kind.into(),
            theta: theta.to_vec(),
            restarts: cfg.restarts,
            local_steps: cfg.local_steps,
            seed: cfg.seed,
            dim: r.dim,
            best_value: fin(r.best_value),
            best_restart: r.best_restart,
            floor: r.floor,
            restart_values: r.restart_values.iter().map(|&v| fin(v)).collect(),
            cr_value: verify.map(|v| v.cr_value),
            gap_above: verify.map(|v| v.gap_above),
            relative_gap: verify.map(|v| v.relative_gap),
        }
    }
}

impl Report for OracleReport {
    fn validate(&self) -> Result<()> {
        finite("floor", [self.floor])?;
        if self.restart_values.len() != self.restarts {
            return Err(bad("restart_values: one entry per restart expected"));
        }
        let slack = 1e-9 * self.floor.abs().max(1.0);
        if let Some(b) = self.best_value {
            if b < self.floor - slack {
                return Err(bad(format!("best value {b} lies below the SLD floor {}", self.floor)));
            }
            let min = self.restart_values.iter().flatten().fold(f64::INFINITY, |a, &x| a.min(x));
            if min.is_finite() && b > min {
                return Err(bad("best value exceeds the smallest restart value"));
            }
        }
        if let (Some(b), Some(c)) = (self.best_value, self.cr_value) {
            if b < c - 1e-9 * c.abs().max(1.0) {
                return Err(QestimError::internal(format!("oracle value {b} undercuts the closed form {c}")));
            }
        }
        Ok(())
    }

    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "restarts: {} (seed {}, {} local steps, dimension {})", self.restarts, self.seed, self.local_steps, self.dim);
        match self.best_value {
            Some(b) => {
                let _ = writeln!(s, "best Tr GV: {}", sig9(b));
            }
            None => {
                let _ = writeln!(s, "best Tr GV: inf (all restarts singular); interval [{}, inf)", sig9(self.floor));
            }
        }
        if let Some(r) = self.best_restart {
            let _ = writeln!(s, "best restart: {r}");
        }
        let _ = writeln!(s, "SLD floor: {}", sig9(self.floor));
        if let (Some(c), Some(g), Some(rg)) = (self.cr_value, self.gap_above, self.relative_gap) {
            let _ = writeln!(s, "CR: {}", sig9(c));
            let _ = writeln!(s, "gap above CR: {} (relative {})", sig9(g), sig9(rg));
        }
        s
    }
}

// ---------------------------------------------------------------------------
// qMLE

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QmleReport {
    pub kind: String,
    pub config: QmleConfig,
    pub theta_true: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub cr_value: f64,
    pub trials: usize,
    pub flagged: usize,
    pub fallback_steps: usize,
    pub covariance: Vec<Vec<f64>>,
    /// `N · Tr G V̂` about the true value.
    pub scaled_risk: f64,
    pub scaled_mse: f64,
    /// `scaled_risk / cr_value`.
    pub ratio: f64,
}

impl QmleReport {
    pub fn new(kind: &str, run: &QmleRun, cr_value: f64) -> Self {
        QmleReport {
            kind: kind.into(),
            config: run.config.clone(),
            theta_true: run.theta_true.clone(),
            g: rows(&run.g),
            cr_value,
            trials: run.trials.len(),
            flagged: run.flagged,
            fallback_steps: run.trials.iter().map(|t| t.fallback_steps).sum(),
            covariance: rows(&run.covariance),
            scaled_risk: run.scaled_risk,
            scaled_mse: run.scaled_mse,
            ratio: run.scaled_risk / cr_value,
        }
    }
}

impl Report for QmleReport {
    fn validate(&self) -> Result<()> {
        let m = self.theta_true.len();
        symmetric("g", &square("g", &self.g, m)?, 1.0)?;
        if self.trials != self.config.trials || self.flagged > self.trials {
            return Err(bad("trial counts are inconsistent"));
        }
        if self.flagged < self.trials {
            symmetric("covariance", &square("covariance", &self.covariance, m)?, 1.0)?;
            finite("scaled_risk", [self.scaled_risk, self.scaled_mse, self.ratio])?;
        }
        finite("cr_value", [self.cr_value])?;
        Ok(())
    }

    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "policy: {:?}", self.config.policy);
        let _ = writeln!(s, "N: {}", self.config.n_samples);
        let _ = writeln!(s, "trials: {} ({} flagged, {} fallback steps)", self.trials, self.flagged, self.fallback_steps);
        let _ = writeln!(s, "CR: {}", sig9(self.cr_value));
        let _ = writeln!(s, "N Tr G V: {}", sig9(self.scaled_risk));
        let _ = writeln!(s, "N Tr G MSE: {}", sig9(self.scaled_mse));
        let _ = writeln!(s, "ratio to CR: {}", sig9(self.ratio));
        s
    }
}

// ---------------------------------------------------------------------------
// time-energy

impl Report for TestPowerReport {
    fn validate(&self) -> Result<()> {
        finite(
            "report",
            [self.t0, self.dt, self.hbar, self.energy_variance, self.w, self.w_quadratic, self.js, self.j_mms, self.stein_exponent, self.power],
        )?;
        if !(-1e-12..=1.0 + 1e-12).contains(&self.w) {
            return Err(bad("w must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.power) || self.n == 0 || self.hbar <= 0.0 {
            return Err(bad("power, N or hbar out of range"));
        }
        if self.power_quadratic.is_some() != self.quadratic_regime {
            return Err(bad("power_quadratic must be present exactly in the quadratic regime"));
        }
        Ok(())
    }

    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "t0: {}", sig9(self.t0));
        let _ = writeln!(s, "dt: {}", sig9(self.dt));
        let _ = writeln!(s, "N: {}", self.n);
        let _ = writeln!(s, "<dH^2>: {}", sig9(self.energy_variance));
        let _ = writeln!(s, "w: {}", sig9(self.w));
        let _ = writeln!(s, "w (quadratic): {}", sig9(self.w_quadratic));
        let _ = writeln!(s, "JS: {}", sig9(self.js));
        let _ = writeln!(s, "J_Mms: {}", sig9(self.j_mms));
        let _ = writeln!(s, "stein exponent: {}", sig9(self.stein_exponent));
        let _ = writeln!(s, "power: {}", sig9(self.power));
        match self.power_quadratic {
            Some(p) => {
                let _ = writeln!(s, "power (quadratic): {}", sig9(p));
            }
            None => {
                let _ = writeln!(s, "quadratic regime: false");
            }
        }
        s
    }
}

// ---------------------------------------------------------------------------
// weight files

/// Parses a weight matrix from JSON (`[[1, 0], [0, 2]]`) or from plain rows
/// of numbers separated by whitespace or commas. `#` starts a comment.
pub fn parse_weight(text: &str) -> Result<WeightMatrix> {
    let trimmed = text.trim_start();
    let rows: Vec<Vec<f64>> = if trimmed.starts_with('[') {
        serde_json::from_str(text)?
    } else {
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|e| QestimError::Parse(format!("line {}: '{t}': {e}", ln + 1))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        rows
    };
    let m = rows.len();
    if m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(bad(format!("weight matrix must be square; got {m} rows of lengths {:?}", rows.iter().map(Vec::len).collect::<Vec<_>>())));
    }
    WeightMatrix::new(rows_to_real_matrix(&rows)?)
}

/// Full-precision CSV float.
pub fn csv_float(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::auto_bound;
    use crate::geometry::info_geometry;
    use crate::measurements::optimal_measurement;
    use crate::models::{tangent_frame, zoo};

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(4.0), "4.00000000");
        assert_eq!(sig9(-0.5), "-0.500000000");
        assert_eq!(sig9(123456.789), "123456.789");
        assert_eq!(sig9(9.9999999999), "10.0000000");
        assert_eq!(sig9(1.5e-7), "1.50000000e-7");
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(f64::INFINITY), "inf");
    }

    #[test]
    fn weight_formats() {
        let a = parse_weight("[[2, 0.5], [0.5, 1]]").unwrap();
        let b = parse_weight("# G\n2 0.5\n0.5, 1\n").unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert!(parse_weight("1 2\n3 4").is_err());
        assert!(parse_weight("1 0\n0 -1").is_err());
        assert!(parse_weight("1 2 3\n").is_err());
        let e = parse_weight("1 x\n0 1").unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn geometry_and_bound_round_trip() {
        let model = zoo::spin_coherent(0.5, 0.5, 1.0).unwrap();
        let theta = [1.0, 0.4];
        let geom = info_geometry(&tangent_frame(&model, &theta).unwrap()).unwrap();
        let gr = GeometryReport::new(model.kind(), &theta, &geom).unwrap();
        let text = emit_json(&gr).unwrap();
        assert_eq!(parse_report::<GeometryReport>(&text).unwrap(), gr);

        let g = WeightMatrix::new(geom.js.clone()).unwrap();
        let b = auto_bound(&geom, &g).unwrap();
        let br = BoundReport::new(model.kind(), &theta, &geom, &g, &b).unwrap();
        let text = emit_json(&br).unwrap();
        assert_eq!(parse_report::<BoundReport>(&text).unwrap(), br);
        assert!(br.to_text().contains("CR: 4.0000000"), "{}", br.to_text());
    }

    #[test]
    fn measurement_round_trip() {
        let model = zoo::synthetic_blocks(&[0.6]).unwrap();
        let plan = optimal_measurement(&model, &[0.0, 0.0], &WeightMatrix::identity(2)).unwrap();
        let r = MeasurementReport::new(model.kind(), &plan);
        let text = emit_json(&r).unwrap();
        assert_eq!(parse_report::<MeasurementReport>(&text).unwrap(), r);
    }

    #[test]
    fn tampered_reports_rejected() {
        let model = zoo::spin_coherent(0.5, 0.5, 1.0).unwrap();
        let theta = [1.0, 0.4];
        let geom = info_geometry(&tangent_frame(&model, &theta).unwrap()).unwrap();
        let mut gr = GeometryReport::new(model.kind(), &theta, &geom).unwrap();
        gr.js[0][1] += 1.0;
        assert!(emit_json(&gr).is_err());
        let g = WeightMatrix::identity(2);
        let mut br = BoundReport::new(model.kind(), &theta, &geom, &g, &auto_bound(&geom, &g).unwrap()).unwrap();
        br.cr_value = br.floor * 0.5;
        assert!(emit_json(&br).is_err());
    }
}
