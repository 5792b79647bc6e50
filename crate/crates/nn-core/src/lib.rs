//! Deterministic feed-forward network engine.
//!
//! Everything here is plain Rust over row-major `f64` matrices: no BLAS, no
//! autograd. Backward passes are hand-derived and checked against central
//! finite differences in the test suite. All stochastic operations (weight
//! initialization, epoch shuffling, dropout masks) draw from ChaCha streams
//! seeded explicitly, so a given seed reproduces a training run bit for bit.
//!
//! Layout:
//! - [`matrix`]: dense matrix type and the small set of kernels the engine needs
//! - [`arch`]: parsers for the `mlp:...` / `drop:...` layer strings
//! - [`net`]: network state, forward pass with caches, analytic backward pass
//! - [`loss`]: tempered softmax, cross-entropy, distillation loss
//! - [`optim`]: learning-rate schedule and SGD with classical momentum
//! - [`train`]: mini-batch training loop over pluggable batch objectives

pub mod arch;
pub mod loss;
pub mod matrix;
pub mod net;
pub mod optim;
pub mod train;

pub use arch::{parse_architecture, parse_dropout};
pub use loss::{
    cross_entropy, distillation_loss, one_hot, per_row_cross_entropy, softmax_ce_grad,
    softmax_temperature,
};
pub use matrix::Matrix;
pub use net::{FeedForwardNet, ForwardCache, ForwardMode, Gradients};
pub use optim::{lr_schedule, sgd_momentum_step, Velocity};
pub use train::{
    accuracy, evaluate_accuracy, train, BatchObjective, DistillObjective, EpochRecord,
    HardLabelObjective, TrainConfig, TrainHistory, DROPOUT_STREAM_SALT,
};

use thiserror::Error;

/// Errors produced by the network engine.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch in {op}: left is {left}, right is {right}")]
    DimensionMismatch {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("matrix data length {got} does not match {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, got: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("architecture must list at least two layers, got {0}")]
    TooFewLayers(usize),

    #[error("expected {expected} dropout rates (one per hidden layer), got {got}")]
    DropoutArity { expected: usize, got: usize },

    #[error("failed to parse {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("row {row} index {index} is out of bounds for {len} rows")]
    RowOutOfBounds { row: usize, index: usize, len: usize },

    #[error("numeric failure: {0}")]
    NumericFailure(String),
}
