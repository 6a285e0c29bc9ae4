use thiserror::Error;

use crate::numeric::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not diagonalizable with real spectrum: {0}")]
    NotDiagonalizable(String),
    #[error("matrix violates positive eigenvalues: smallest eigenvalue {0:e}")]
    NonPositiveSpectrum(f64),
    #[error("index {index} out of range (valid 1..={len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no forcing generators supplied")]
    EmptyGenerators,
    #[error("generator {0} is not positive")]
    NonPositiveGenerator(f64),
    #[error("cutoff {cutoff} is below the largest generator {max}")]
    CutoffTooSmall { cutoff: f64, max: f64 },
    #[error("exponent sequence is not closed: {0}")]
    GridNotClosed(String),
    #[error("exponent lattice misses eigenvalue {0}")]
    LatticeMissingEigenvalue(f64),

    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("cannot embed arity {from} into smaller arity {to}")]
    ArityShrink { from: usize, to: usize },
    #[error("codimension mismatch: {0} vs {1}")]
    CodimMismatch(usize, usize),
    #[error("evaluation needs positive arguments, got {0}")]
    NonPositiveArgument(f64),
    #[error("t = {t} is inside the domain guard of L_{m} (needs t > {bound})")]
    DomainGuard { m: usize, t: f64, bound: f64 },
    #[error("polynomial has a non-integer or negative exponent: {0}")]
    NonIntegerExponent(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("form of degree {expected} applied to {got} arguments")]
    DegreeMismatch { expected: usize, got: usize },

    #[error("operation needs regime {expected}, spec has {got}")]
    RegimeMismatch { expected: String, got: String },
    #[error("forcing arities must be nondecreasing: {0}")]
    ArityNonMonotone(String),
    #[error("truncation order {order} exceeds the {available} computed terms")]
    TruncationTooDeep { order: usize, available: usize },
    #[error("invalid problem: {0}")]
    Validation(String),
    #[error("exact arithmetic unavailable: {0}")]
    ExactUnavailable(String),

    #[error("solution diverged at t = {t:e} (norm {norm:e})")]
    Diverged {
        t: f64,
        norm: f64,
        partial: Box<Trajectory>,
    },
    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("need at least {needed} usable samples, have {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("resonant terms carry uncalibrated constants: {0}")]
    ResonanceUncalibrated(String),
    #[error("ill-conditioned fit (condition number {0:e})")]
    IllConditionedFit(f64),

    #[error("malformed document: {0}")]
    Format(String),
}

impl Error {
    /// True for errors caused by input that violates a model assumption.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NotDiagonalizable(_)
                | Error::NonPositiveSpectrum(_)
                | Error::EmptyGenerators
                | Error::NonPositiveGenerator(_)
                | Error::GridNotClosed(_)
                | Error::LatticeMissingEigenvalue(_)
                | Error::NonIntegerExponent(_)
                | Error::DimensionMismatch { .. }
                | Error::CodimMismatch(..)
                | Error::ArityNonMonotone(_)
                | Error::RegimeMismatch { .. }
                | Error::Validation(_)
                | Error::Format(_)
        )
    }

    pub fn is_integrator(&self) -> bool {
        matches!(self, Error::Diverged { .. } | Error::StepUnderflow { .. })
    }
}
