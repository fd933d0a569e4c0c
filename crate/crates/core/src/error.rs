use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at node {index}")]
    NonFiniteValue { index: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("principal eigenvector is not sign-definite (min {min:.3e})")]
    NonPositiveEigenvector { min: f64 },

    #[error("no positive steady state: principal eigenvalue {lambda1:.6} is not negative")]
    NoPositiveState { lambda1: f64 },

    #[error("continuation exhausted {steps} steps before reaching the end of the branch")]
    StepsExhausted { steps: usize },

    #[error("continuation passed delta_max = {delta_max} without finding a fold")]
    FoldNotFound { delta_max: f64 },

    #[error("time step failed at t = {t} after {halvings} step halvings")]
    StepFailed { t: f64, halvings: usize },

    #[error("threshold width too large: eps0 = {eps0:.6} must be below -lambda1/2 = {bound:.6}")]
    InvalidEps { eps0: f64, bound: f64 },

    #[error("time-periodic forcing requires a bounded (Neumann) domain")]
    BoundedDomainRequired,
}

impl Error {
    /// True for solver failures (as opposed to invalid input).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::NonPositiveEigenvector { .. }
                | Error::StepsExhausted { .. }
                | Error::FoldNotFound { .. }
                | Error::StepFailed { .. }
                | Error::NoPositiveState { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
