use thiserror::Error;

use crate::model::Regime;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures of the adaptive integrator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    MaxSteps { max_steps: usize, t: f64 },
    #[error("step size underflow (h = {h:e}) at t = {t}")]
    StepUnderflow { h: f64, t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("state is not an equilibrium (residual {residual:e})")]
    NotAnEquilibrium { residual: f64 },
    #[error("operation requires {expected}, parameters are in regime {actual:?}")]
    RegimeMismatch { expected: &'static str, actual: Regime },
    #[error("attractor is the singleton {{0}} when k <= 0")]
    TrivialAttractor,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("certificate not applicable: {0}")]
    NotApplicable(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("no section crossing within horizon {horizon}")]
    NoCrossing { horizon: f64 },
    #[error("tangential section crossing (|y'| = {rate:e})")]
    TangentialCrossing { rate: f64 },
    #[error("singular section Jacobian (|det| = {det:e})")]
    SingularJacobian { det: f64 },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}
