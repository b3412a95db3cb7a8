use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// One step of the active-set loop, kept for diagnosing iteration-limit failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpTraceStep {
    pub active: usize,
    pub objective: f64,
    pub worst_slack: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("argument {value} outside the domain of the cumulant generating function ({reason})")]
    OutOfDomain { value: f64, reason: &'static str },

    #[error("tilt solve did not converge: last iterate {last_iterate}, residual {residual:e}")]
    TiltNotConverged { last_iterate: f64, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rare-event set is empty")]
    EmptySet,

    #[error("active-set iteration limit reached after {} steps", trace.len())]
    QpIterationLimit { trace: Vec<QpTraceStep> },

    #[error("QP solution failed its optimality check: KKT residual {kkt_residual:e}, violation {violation:e}")]
    QpInaccurate { kkt_residual: f64, violation: f64 },

    #[error("numerical failure: {0}")]
    Numerical(&'static str),

    #[error("mean of the input lies inside the rare-event set")]
    MeanInsideSet,

    #[error("dominating-point cap of {cap} reached; raise max_points")]
    MaxPointsReached { cap: usize },

    #[error("need at least {required} replications, got {got}")]
    TooFewReplications { required: usize, got: usize },

    #[error("bound is vacuous: epsilon {epsilon} <= n * p_tilde_2 = {n_p_tilde_2:e}")]
    VacuousBound { epsilon: f64, n_p_tilde_2: f64 },
}

impl Error {
    /// Failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TiltNotConverged { .. }
                | Error::QpIterationLimit { .. }
                | Error::QpInaccurate { .. }
                | Error::Numerical(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
