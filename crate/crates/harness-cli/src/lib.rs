//! Config-driven experiment runner over the toolkit crates.
//!
//! A single flat key-value [`config::ExperimentConfig`] describes a full
//! experiment: dataset source, split fractions, architecture, training
//! hyperparameters, the noise family injected into the train and val splits,
//! and an optional noise-robust training method. [`run::run_single`] executes
//! the whole pipeline (load, split, subsample, corrupt, train, evaluate) and
//! emits a [`run::RunReport`] whose echoed config reruns to identical
//! accuracies.
//!
//! On top of single runs sit the experiment protocols: noise-ratio sweeps,
//! dataset-size sweeps, a dropout ablation, a robust-method comparison and a
//! penultimate-feature export for external projection. Each aggregates plain
//! [`run::RunReport`]s into a fixed-column CSV table.
//!
//! The test split is never corrupted: corruption covers exactly the train
//! and val splits, and the noisy-label artifact records that coverage.

pub mod ablate;
pub mod compare;
pub mod config;
pub mod embed;
pub mod run;
pub mod sweep;

pub use ablate::{ablation_table, dropout_ablation, DropoutAblation};
pub use compare::{compare_robust, compare_table, CompareRow};
pub use config::{
    parse_config_file, BootstrapKind, DataFormat, ExperimentConfig, NoiseKind, RobustMethod,
};
pub use embed::{export_embedding, sigma_report};
pub use run::{
    corrupt_only, distill_config, empirical_transition, prepare_dataset, report_json, run_single,
    run_with_labels, write_report, RunOutput, RunReport,
};
pub use sweep::{ratio_table, size_table, sweep_ratios, sweep_sizes, DEFAULT_RATIOS, DEFAULT_SIZES};

use thiserror::Error;

/// Any failure a pipeline stage can produce.
#[derive(Debug, Error)]
pub enum ToolkitError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Data(#[from] data_io::DataError),

    #[error(transparent)]
    Nn(#[from] nn_core::NnError),

    #[error(transparent)]
    Noise(#[from] noise_synth::NoiseError),

    #[error(transparent)]
    Robust(#[from] robust_baselines::RobustError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A stage-tagged failure, so callers always learn which pipeline step died.
#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct HarnessError {
    pub stage: &'static str,
    #[source]
    pub source: ToolkitError,
}

impl HarnessError {
    pub fn config(message: impl Into<String>) -> Self {
        HarnessError { stage: "config", source: ToolkitError::Config(message.into()) }
    }
}

/// Tags a library result with the pipeline stage it belongs to.
pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, HarnessError>;
}

impl<T, E: Into<ToolkitError>> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, HarnessError> {
        self.map_err(|e| HarnessError { stage, source: e.into() })
    }
}

/// Process exit code for an error: 2 for configuration problems, 3 for data
/// problems, 4 for numeric failures.
pub fn exit_code(err: &HarnessError) -> u8 {
    fn nn_code(err: &nn_core::NnError) -> u8 {
        match err {
            nn_core::NnError::NumericFailure(_) | nn_core::NnError::NonFinite { .. } => 4,
            _ => 2,
        }
    }

    fn noise_code(err: &noise_synth::NoiseError) -> u8 {
        match err {
            noise_synth::NoiseError::Nn(e) => nn_code(e),
            noise_synth::NoiseError::Data(e) => data_code(e),
            _ => 2,
        }
    }

    fn data_code(err: &data_io::DataError) -> u8 {
        match err {
            data_io::DataError::Nn(e) => nn_code(e),
            _ => 3,
        }
    }

    match &err.source {
        ToolkitError::Config(_) => 2,
        ToolkitError::Data(e) => data_code(e),
        ToolkitError::Nn(e) => nn_code(e),
        ToolkitError::Noise(e) => noise_code(e),
        ToolkitError::Robust(e) => match e {
            robust_baselines::RobustError::Nn(inner) => nn_code(inner),
            robust_baselines::RobustError::Noise(inner) => noise_code(inner),
            _ => 2,
        },
        ToolkitError::Io(_) => 3,
    }
}
