//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by meshing, problem construction, solving and cost
/// evaluation.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point:?} lies outside the domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("cannot differentiate: {node}")]
    NonDifferentiable { node: String },

    #[error("h must lie in (0, 1/lambda): h={h}, lambda={lambda}")]
    InvalidTimeStep { h: f64, lambda: f64 },

    #[error("no convergence after {iterations} iterations (last update {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error(
        "foot point {foot:?} of vertex {vertex} under control {control} leaves the domain"
    )]
    FootOutsideDomain {
        vertex: usize,
        control: usize,
        foot: Vec<f64>,
    },

    #[error("non-finite value at vertex {vertex} ({coords:?}): {context}")]
    NonFinite {
        vertex: usize,
        coords: Vec<f64>,
        context: String,
    },

    #[error("missing bound {name}; run problem validation and supply it")]
    MissingBound { name: &'static str },

    #[error("enumeration guard: {sequences} control sequences exceed the 10^7 limit")]
    EnumerationGuard { sequences: u128 },

    #[error(
        "truncation tail {tail:e} exceeds tolerance {tolerance:e}; \
         increase the sequence length to at least {needed}"
    )]
    TailExceedsTolerance {
        tail: f64,
        tolerance: f64,
        needed: usize,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True for failures of the numerical process itself (as opposed to
    /// invalid input). Drives the CLI exit-code split.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::NonFinite { .. } | Error::Internal(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
