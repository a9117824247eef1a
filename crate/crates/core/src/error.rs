//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library. Messages name the violated precondition
/// so callers (and the CLI) can print them verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate embedding: zero vector has no direction")]
    DegenerateEmbedding,

    #[error("embedding is not unit norm (norm deviates by {deviation:e})")]
    NotUnitNorm { deviation: f64 },

    #[error("{what} must be finite")]
    NonFinite { what: &'static str },

    #[error("negative set must be nonempty")]
    EmptyNegatives,

    #[error("{name} must be {constraint} (got {value})")]
    InvalidParameter {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },

    #[error("weight vector must sum to 1 within 1e-9 (sum {sum})")]
    WeightSumViolation { sum: f64 },

    #[error("weight vector has a negative entry at index {index}")]
    NegativeWeight { index: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("not absolutely continuous: q has mass at index {index} where q0 has none")]
    NotAbsolutelyContinuous { index: usize },

    #[error("weight singularity: shifted score {value} lies outside the family support")]
    WeightSingularity { value: f64 },

    #[error("approximation undefined: score variance is zero")]
    ApproximationUndefined,

    #[error("conjugate infinite at {argument}")]
    ConjugateInfinite { argument: f64 },

    #[error("unknown divergence {name:?} (expected KL, ChiSquared, ModifiedChiSquared or Hellinger)")]
    UnknownDivergence { name: String },

    #[error("no true negatives exist: data has a single class and false-negative ratio < 1")]
    NoTrueNegatives,

    #[error("training diverged: non-finite loss at step {step}")]
    DivergentTraining { step: usize },

    #[error("linear evaluation requires at least two classes")]
    SingleClassDataset,

    #[error("probability vector invalid: {reason}")]
    InvalidDistribution { reason: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;
