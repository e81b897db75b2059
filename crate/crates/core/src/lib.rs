//! Estimation-theoretic geometry of parametric quantum-state models.
//!
//! The crate computes the SLD Fisher metric, its antisymmetric companion
//! and the β-spectrum of a model at a point, evaluates attainable
//! Cramér–Rao type bounds where closed forms exist, builds projective
//! measurements that attain them, and cross-checks every bound with a
//! seeded stochastic search over measurements and with Monte-Carlo runs.
//!
//! Module map:
//!
//! * [`operators`]: dense complex linear algebra and validated state types.
//! * [`models`]: parametric families, tangents, lifts and SLDs, the model zoo
//!   and the JSON model-spec format.
//! * [`geometry`]: `J^S`, `J̃`, β-spectrum, curvature and holonomy.
//! * [`bounds`]: closed-form attainable bounds.
//! * [`measurements`]: classical Fisher information, optimal estimators and
//!   PVM construction.
//! * [`oracle`]: brute-force measurement search used to verify bounds.
//! * [`simulate`]: adaptive maximum-likelihood runs and the time-energy test.
//! * [`selftest`]: the acceptance checks, shared by the test suite and the CLI.

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod io;
pub mod measurements;
pub mod models;
pub mod operators;
pub mod oracle;
pub mod selftest;
pub mod simulate;
pub mod tolerance;

pub use error::{QestimError, Result};
pub use tolerance::Tolerances;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type RVector = nalgebra::DVector<f64>;
