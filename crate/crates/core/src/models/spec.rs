//! JSON model-spec format.
//!
//! ```json
//! { "kind": "spin_coherent", "hbar": 1.0, "params": { "s": 0.5, "m": 0.5 },
//!   "theta": [1.0471975511965976, 0.7853981633974483], "tangent": "analytic" }
//! ```
//!
//! Complex numbers are `[re, im]` pairs; matrices are arrays of rows.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{zoo, ParametricModel, TangentMode, DEFAULT_FD_STEP};
use crate::operators::{pairs_to_matrix, pairs_to_vector};
use crate::{QestimError, Result};

/// Upper bound on the size of a spec document.
pub const MAX_SPEC_BYTES: usize = 16 << 20;

pub const DEFAULT_TRUNC_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc_dim: Option<usize>,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangent: Option<TangentMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpinParams {
    s: f64,
    m: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyParams {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PmShiftParams {
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    phi0: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CanonicalParams {
    energies: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeEvolutionParams {
    hamiltonian: Vec<Vec<[f64; 2]>>,
    psi0: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitParams {
    #[serde(default)]
    state: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    tangents: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    density: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    derivatives: Option<Vec<Vec<Vec<[f64; 2]>>>>,
}

fn params<T: DeserializeOwned>(v: &serde_json::Value, kind: &str) -> Result<T> {
    let v = if v.is_null() { serde_json::Value::Object(Default::default()) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| QestimError::Parse(format!("params (kind '{kind}'): {e}")))
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> QestimError {
    QestimError::validation(format!("field '{field}': {msg}"))
}

fn matrix(rows: &[Vec<[f64; 2]>], field: &str) -> Result<crate::CMatrix> {
    if rows.is_empty() || rows.len() > zoo::MAX_DIM {
        return Err(field_err(field, format!("matrix must have 1..={} rows", zoo::MAX_DIM)));
    }
    if rows.iter().any(|r| r.len() != rows.len()) {
        return Err(field_err(field, "matrix must be square"));
    }
    pairs_to_matrix(rows).map_err(|e| field_err(field, e))
}

fn vector(p: &[[f64; 2]], field: &str) -> Result<crate::CVector> {
    if p.is_empty() || p.len() > zoo::MAX_DIM {
        return Err(field_err(field, format!("vector must have 1..={} entries", zoo::MAX_DIM)));
    }
    if p.iter().flatten().any(|x| !x.is_finite()) {
        return Err(field_err(field, "non-finite entry"));
    }
    Ok(pairs_to_vector(p))
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.len() > MAX_SPEC_BYTES {
            return Err(QestimError::validation(format!("spec exceeds {MAX_SPEC_BYTES} bytes")));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(QestimError::from)
    }

    fn hbar(&self) -> Result<f64> {
        let h = self.hbar.unwrap_or(1.0);
        if !(h > 0.0 && h.is_finite()) {
            return Err(field_err("hbar", format!("must be positive, got {h}")));
        }
        Ok(h)
    }

    fn trunc_dim(&self) -> Result<usize> {
        let n = self.trunc_dim.unwrap_or(DEFAULT_TRUNC_DIM);
        if n == 0 || n > zoo::MAX_DIM {
            return Err(field_err("trunc_dim", format!("must be in 1..={}, got {n}", zoo::MAX_DIM)));
        }
        Ok(n)
    }

    /// Hamiltonian, initial state and `ℏ` of a `time_evolution` spec.
    pub fn time_evolution_parts(&self) -> Result<(crate::CMatrix, crate::CVector, f64)> {
        if self.kind != "time_evolution" {
            return Err(field_err("kind", format!("expected 'time_evolution', got '{}'", self.kind)));
        }
        let p: TimeEvolutionParams = params(&self.params, &self.kind)?;
        let h = matrix(&p.hamiltonian, "params.hamiltonian")?;
        let psi = vector(&p.psi0, "params.psi0")?;
        if h.nrows() != psi.len() {
            return Err(field_err("params.psi0", format!("length {} differs from the Hamiltonian size {}", psi.len(), h.nrows())));
        }
        Ok((h, psi, self.hbar()?))
    }

    /// Builds the model and the evaluation point.
    pub fn build(&self) -> Result<(ParametricModel, Vec<f64>)> {
        let hbar = self.hbar()?;
        let kind = self.kind.as_str();
        let model = match kind {
            "spin_coherent" => {
                let p: SpinParams = params(&self.params, kind)?;
                zoo::spin_coherent(p.s, p.m, hbar)?
            }
            "squeezed" => {
                let _: EmptyParams = params(&self.params, kind)?;
                zoo::squeezed(self.trunc_dim()?, hbar)?
            }
            "pm_shift" => {
                let p: PmShiftParams = params(&self.params, kind)?;
                match (p.n, p.phi0) {
                    (Some(n), None) => zoo::pm_shift_fock(n, self.trunc_dim()?, hbar)?,
                    (None, Some(v)) => {
                        let v = vector(&v, "params.phi0")?;
                        if let Some(t) = self.trunc_dim {
                            if t != v.len() {
                                return Err(field_err("params.phi0", format!("length {} differs from trunc_dim {t}", v.len())));
                            }
                        }
                        zoo::pm_shift_vector(v, hbar)?
                    }
                    _ => return Err(field_err("params", "pm_shift needs exactly one of 'n' or 'phi0'")),
                }
            }
            "canonical" => {
                let p: CanonicalParams = params(&self.params, kind)?;
                let k_b = self.k_b.unwrap_or(1.0);
                zoo::canonical(p.energies, k_b, hbar)?
            }
            "time_evolution" => {
                let p: TimeEvolutionParams = params(&self.params, kind)?;
                let h = matrix(&p.hamiltonian, "params.hamiltonian")?;
                let psi = vector(&p.psi0, "params.psi0")?;
                zoo::time_evolution(h, psi, hbar)?
            }
            "explicit" => {
                let p: ExplicitParams = params(&self.params, kind)?;
                match (p.state, p.tangents, p.density, p.derivatives) {
                    (Some(s), Some(t), None, None) => {
                        if t.len() > zoo::MAX_PARAMS {
                            return Err(field_err("params.tangents", "too many tangents"));
                        }
                        let phi = vector(&s, "params.state")?;
                        let ts = t.iter().map(|v| vector(v, "params.tangents")).collect::<Result<Vec<_>>>()?;
                        let theta0 = self.theta.clone().unwrap_or_else(|| vec![0.0; ts.len()]);
                        zoo::explicit_pure(phi, ts, theta0)?
                    }
                    (None, None, Some(d), Some(ds)) => {
                        if ds.len() > zoo::MAX_PARAMS {
                            return Err(field_err("params.derivatives", "too many derivatives"));
                        }
                        let rho = matrix(&d, "params.density")?;
                        let dd = ds.iter().map(|m| matrix(m, "params.derivatives")).collect::<Result<Vec<_>>>()?;
                        let theta0 = self.theta.clone().unwrap_or_else(|| vec![0.0; dd.len()]);
                        zoo::explicit_mixed(rho, dd, theta0)?
                    }
                    _ => {
                        return Err(field_err(
                            "params",
                            "explicit needs either {state, tangents} or {density, derivatives}",
                        ))
                    }
                }
            }
            other => {
                return Err(field_err(
                    "kind",
                    format!("unknown kind '{other}'; expected spin_coherent, squeezed, pm_shift, canonical, time_evolution or explicit"),
                ))
            }
        };
        let mut model = model;
        if let Some(mode) = self.tangent {
            model = model.with_tangent_mode(mode);
        }
        let h = self.fd_step.unwrap_or(DEFAULT_FD_STEP);
        if !(h > 0.0 && h.is_finite() && h < 1.0) {
            return Err(field_err("fd_step", format!("must be in (0, 1), got {h}")));
        }
        model = model.with_fd_step(h);
        let theta = match &self.theta {
            Some(t) => t.clone(),
            None if matches!(kind, "time_evolution" | "explicit") => vec![0.0; model.n_params()],
            None => return Err(field_err("theta", format!("required for kind '{kind}'"))),
        };
        if theta.len() != model.n_params() {
            return Err(field_err("theta", format!("expected {} components, got {}", model.n_params(), theta.len())));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(field_err("theta", "non-finite component"));
        }
        Ok((model, theta))
    }
}

/// Parses and builds in one step.
pub fn load_model(text: &str) -> Result<(ParametricModel, Vec<f64>)> {
    ModelSpec::from_json(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spin_spec() {
        let (m, t) = load_model(r#"{"kind":"spin_coherent","params":{"s":0.5,"m":0.5},"theta":[1.0,0.5]}"#).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(t, vec![1.0, 0.5]);
    }

    #[test]
    fn unknown_field_rejected() {
        let e = load_model(r#"{"kind":"canonical","params":{"energies":[0,1]},"theta":[1],"bogus":1}"#).unwrap_err();
        assert!(matches!(e, QestimError::Parse(_)));
        assert!(e.to_string().contains("line 1"));
    }

    #[test]
    fn bad_params_named() {
        let e = load_model(r#"{"kind":"spin_coherent","params":{"s":0.5},"theta":[1,0]}"#).unwrap_err();
        assert!(e.to_string().contains("params"), "{e}");
        let e = load_model(r#"{"kind":"spin_coherent","params":{"s":0.7,"m":0.5},"theta":[1,0]}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn theta_length_checked() {
        let e = load_model(r#"{"kind":"canonical","params":{"energies":[0,1]},"theta":[1,2]}"#).unwrap_err();
        assert!(e.to_string().contains("theta"));
    }

    #[test]
    fn explicit_pure_spec() {
        let text = r#"{"kind":"explicit","params":{"state":[[1,0],[0,0],[0,0]],
            "tangents":[[[0,0],[0.5,0],[0,0]],[[0,0],[0,0.3],[0.4,0]]]}}"#;
        let (m, t) = load_model(text).unwrap();
        assert_eq!(m.n_params(), 2);
        assert_eq!(t, vec![0.0, 0.0]);
    }

    #[test]
    fn round_trip() {
        let text = r#"{"kind":"pm_shift","hbar":2.0,"trunc_dim":40,"params":{"n":1},"theta":[0.1,0.2],"tangent":"finite_difference","fd_step":1e-5}"#;
        let spec = ModelSpec::from_json(text).unwrap();
        let again = ModelSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(spec, again);
        let (m, _) = again.build().unwrap();
        assert_eq!(m.tangent_mode, TangentMode::FiniteDifference);
        assert_eq!(m.hbar, 2.0);
    }
}
