use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("duration {tau} does not exceed the speed limit tau_min = {tau_min}")]
    InfeasibleDuration { tau: f64, tau_min: f64 },

    #[error("missing boundary value: {0}")]
    MissingBoundary(&'static str),

    /// No real energy gap produces the requested `(p, pdot)` pair.
    #[error("state (p = {p}, pdot = {pdot}) is outside the physical branch")]
    BranchViolation { p: f64, pdot: f64 },

    #[error("quadrature did not converge (error estimate {error_estimate:e})")]
    QuadratureFailure { error_estimate: f64 },

    #[error("integrator step size underflow at t = {t}")]
    IntegratorFailure { t: f64 },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("trajectory grid does not match protocol: {0}")]
    GridMismatch(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
