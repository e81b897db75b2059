use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every module. Construct with
/// `Tolerances::default()` and override individual fields per call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Max-entry deviation accepted for Hermitian inputs.
    pub hermitian: f64,
    /// `|<φ|φ> - 1|` for pure states and `|tr ρ - 1|` for mixed states.
    pub normalization: f64,
    /// Most negative eigenvalue tolerated in a density matrix.
    pub psd: f64,
    /// Minimum eigenvalue for a state to count as faithful.
    pub faithful: f64,
    /// Gram imaginary part that triggers a not-real-Gram error.
    pub real_gram: f64,
    /// Relative threshold below which a vector is treated as linearly dependent.
    pub rank: f64,
    /// Relative `‖J̃‖ / ‖J^S‖` below which a model is quasi-classical.
    pub quasi_classical: f64,
    /// Distance of every β from 1 below which a model is coherent.
    pub coherent: f64,
    /// Probability below which an outcome is excluded from Fisher sums.
    pub probability_floor: f64,
    /// `|∂p|` above which an excluded outcome raises the singular flag.
    pub singular_derivative: f64,
    /// Population of the top two Fock levels accepted after truncation.
    pub leakage: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: 1e-12,
            normalization: 1e-12,
            psd: 1e-12,
            faithful: 1e-10,
            real_gram: 1e-8,
            rank: 1e-10,
            quasi_classical: 1e-9,
            coherent: 1e-6,
            probability_floor: 1e-12,
            singular_derivative: 1e-9,
            leakage: 1e-10,
        }
    }
}
