//! Noise-robust training baselines: forward loss correction, bootstrapping,
//! and co-teaching.
//!
//! Forward correction and bootstrapping are expressed as [`BatchObjective`]
//! implementations so the standard training loop drives them; co-teaching
//! replaces the loop itself because two networks must exchange per-instance
//! losses inside every mini-batch. Each method collapses to plain training
//! under its degenerate parameter (identity matrix, beta of one, zero forget
//! rate), and the test suite pins those equivalences.
//!
//! [`BatchObjective`]: nn_core::BatchObjective

pub mod bootstrap;
pub mod correction;
pub mod coteach;

pub use bootstrap::{bootstrap_loss, bootstrap_targets, BootstrapMode, BootstrapObjective};
pub use correction::{forward_corrected_loss, forward_corrected_probs, ForwardObjective};
pub use coteach::{
    co_teaching_accuracy, co_teaching_train, small_loss_selection, CoTeachingState,
    ForgetSchedule, DEFAULT_WARMUP_EPOCHS,
};

use thiserror::Error;

/// Errors produced by the robust baselines.
#[derive(Debug, Error)]
pub enum RobustError {
    #[error("beta must lie in [0, 1], got {0}")]
    BetaOutOfRange(f64),

    #[error("forget rate must lie in [0, 1), got {0}")]
    ForgetRateOutOfRange(f64),

    #[error("label {label} at position {position} is out of range for {class_count} classes")]
    LabelRange { position: usize, label: usize, class_count: usize },

    #[error("probability row {row} sums to {sum}, not 1")]
    NotNormalized { row: usize, sum: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error(transparent)]
    Nn(#[from] nn_core::NnError),

    #[error(transparent)]
    Noise(#[from] noise_synth::NoiseError),
}

fn check_probability_rows(probabilities: &nn_core::Matrix) -> Result<(), RobustError> {
    for row in 0..probabilities.rows() {
        let sum: f64 = probabilities.row(row).iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(RobustError::NotNormalized { row, sum });
        }
    }
    Ok(())
}

fn check_labels(
    labels: &[usize],
    class_count: usize,
) -> Result<(), RobustError> {
    for (position, &label) in labels.iter().enumerate() {
        if label >= class_count {
            return Err(RobustError::LabelRange { position, label, class_count });
        }
    }
    Ok(())
}
