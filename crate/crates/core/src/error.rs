use thiserror::Error;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    /// A point (or an intermediate value) left the domain where the field is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Requested jet orders exceed what the engine propagates.
    #[error("capability error: requested jet order (x {req_x}, v {req_v}) exceeds supported (x {max_x}, v {max_v})")]
    Capability {
        req_x: usize,
        req_v: usize,
        max_x: usize,
        max_v: usize,
    },

    /// The velocity Hessian (or another matrix that must be invertible) is singular or
    /// too badly conditioned.
    #[error("regularity error: {detail} (condition estimate {condition:.3e})")]
    Regularity { condition: f64, detail: String },

    /// Structurally invalid input (dimension mismatch, bad degree, asymmetric metric, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
}

impl GeomError {
    pub fn domain(msg: impl Into<String>) -> Self {
        GeomError::Domain(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        GeomError::Validation(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        GeomError::Precondition(msg.into())
    }

    pub fn regularity(condition: f64, detail: impl Into<String>) -> Self {
        GeomError::Regularity {
            condition,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, GeomError>;
