//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SymError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is not symplectic (defect {defect:e})")]
    NotSymplectic { defect: f64 },
    #[error("subspaces are not transverse (smallest singular value {sigma:e})")]
    NotTransverse { sigma: f64 },
    #[error("integration diverged at t = {t}")]
    Diverged { t: f64 },
    #[error("identically degenerate arc on [{start}, {end}]")]
    DegenerateArc { start: f64, end: f64 },
    #[error("irregular crossing at t = {t} (kernel of crossing form has dimension {null_dim})")]
    IrregularCrossing { t: f64, null_dim: usize },
    #[error("irregular crossing at endpoint t = {t}; endpoints are never perturbed, apply an epsilon-rotation explicitly")]
    IrregularEndpoint { t: f64 },
    #[error("max CZ index unstable across eps = {eps} and eps/2 ({at_eps} vs {at_half})")]
    EpsilonUnstable { eps: f64, at_eps: String, at_half: String },
    #[error("max CZ routes disagree: kernel formula gives {formula}, eps-rotation gives {perturbed}")]
    MaxCzMismatch { formula: String, perturbed: String },
    #[error("argument {value} is within {tol:e} of an integer; strict floor is ambiguous")]
    AmbiguousFloor { value: f64, tol: f64 },
    #[error("gauge function undefined at the origin for a general body")]
    OriginUndefined,
    #[error("mollification radius delta = {delta} too large for this body")]
    DeltaTooLarge { delta: f64 },
    #[error("sweep exhausted: cannot separate K from the complement of U")]
    CannotSeparate,
    #[error("capacity certificate failed (value {value}, guard {guard})")]
    Uncertified { value: f64, guard: f64 },
    #[error("regime precondition violated: {0}")]
    RegimeViolation(String),
    #[error("fixed-point data inconsistent (residual {residual:e})")]
    InconsistentModel { residual: f64 },
    #[error("point is not fixed by the given circle action")]
    NotFixed,
}

pub type Result<T> = std::result::Result<T, SymError>;
