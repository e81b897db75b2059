use thiserror::Error;

pub type Result<T> = std::result::Result<T, QestimError>;

#[derive(Debug, Error)]
pub enum QestimError {
    /// Malformed or out-of-range input.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("state is not faithful: min eigenvalue {min_eigenvalue:.3e} below threshold {threshold:.3e}; use the pure-state path")]
    NotFaithful { min_eigenvalue: f64, threshold: f64 },

    #[error("redundant parameters: tangent space has rank {rank} but the model has {params} parameters")]
    RedundantParameters { rank: usize, params: usize },

    #[error("not-real-Gram: Gram matrix has imaginary part {max_imag:.3e}")]
    NotRealGram { max_imag: f64 },

    #[error("truncation leakage {leakage:.3e} exceeds {limit:.1e}; increase trunc_dim (currently {trunc_dim})")]
    Truncation { leakage: f64, limit: f64, trunc_dim: usize },

    #[error("step too large: state moved {angle:.3} rad in one step (limit {limit})")]
    StepTooLarge { angle: f64, limit: f64 },

    #[error("SLDs do not commute (commutator norm {norm:.3e})")]
    NonCommuting { norm: f64 },

    #[error("model is not coherent: {0}")]
    NotCoherent(String),

    #[error("weight matrix couples direct-sum blocks (off-block mass {mass:.3e})")]
    BlockCoupling { mass: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A computed result failed its own verification. Always a bug.
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl QestimError {
    pub fn validation(msg: impl Into<String>) -> Self {
        QestimError::Validation(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        QestimError::InternalConsistency(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            QestimError::InternalConsistency(_) => 3,
            _ => 2,
        }
    }
}

impl From<serde_json::Error> for QestimError {
    fn from(e: serde_json::Error) -> Self {
        QestimError::Parse(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(QestimError::validation("x").exit_code(), 2);
        assert_eq!(QestimError::Parse("x".into()).exit_code(), 2);
        assert_eq!(QestimError::NonCommuting { norm: 1.0 }.exit_code(), 2);
        assert_eq!(QestimError::internal("x").exit_code(), 3);
    }
}
