//! Synthetic label noise generators and the feature-sparsity measure.
//!
//! Four corruption families are implemented:
//! - uniform: every class flips to every other class with equal probability
//! - class-dependent: flip targets follow a model's confusion structure
//! - locally concentrated: contiguous feature-space clusters flip together
//! - feature-dependent: a distilled student's confidences pick the flips
//!
//! Matrix-based generators draw each new label independently from a
//! row-stochastic transition matrix, so the realized flip ratio is binomial
//! around the target. The cluster and score-based generators flip an exact
//! `ceil(ratio * n)` count. All generators leave the input labels untouched
//! and return corrupted copies plus flip masks.

pub mod distill;
pub mod local;
pub mod score;
pub mod sparsity;
pub mod transition;

pub use distill::{distill_corrupt, DistillConfig, DistillOutcome};
pub use local::locally_concentrated;
pub use score::{flip_by_score, FlipPlan};
pub use sparsity::{sparsity_sigma, SparsityReport, VARIANCE_CONVENTION};
pub use transition::{
    apply_transition, class_dependent_matrix, confusion_matrix, uniform_matrix, TransitionMatrix,
};

use thiserror::Error;

/// Errors produced by noise generation.
#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("class count must be at least {minimum}, got {got}")]
    TooFewClasses { minimum: usize, got: usize },

    #[error("noise ratio must lie in [0, 1], got {0}")]
    RatioOutOfRange(f64),

    #[error("transition matrix row {row} sums to {sum}, expected 1 within 1e-9")]
    NotRowStochastic { row: usize, sum: f64 },

    #[error("transition matrix entry ({row}, {col}) is {value}, outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },

    #[error("label {label} at position {position} is out of range for {class_count} classes")]
    LabelRange {
        position: usize,
        label: usize,
        class_count: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("requested {requested} flips but only {available} instances are available")]
    TooManyFlips { requested: usize, available: usize },

    #[error(transparent)]
    Nn(#[from] nn_core::NnError),

    #[error(transparent)]
    Data(#[from] data_io::DataError),
}

pub(crate) fn check_ratio(ratio: f64) -> Result<(), NoiseError> {
    if !(ratio.is_finite() && (0.0..=1.0).contains(&ratio)) {
        return Err(NoiseError::RatioOutOfRange(ratio));
    }
    Ok(())
}
