//! Dataset loading, deterministic splitting and noisy-label artifacts.
//!
//! Two on-disk formats are supported: the classic IDX image/label pairs
//! (optionally gzip-compressed, detected by a `.gz` suffix) and headered CSV
//! with one label column. Loaded features always land in `[0, 1]`: IDX pixels
//! are divided by 255 and CSV columns are min-max scaled.
//!
//! Corrupted labels are never written back into a dataset. They live in a
//! [`NoisyLabelSet`] artifact that records provenance (noise type, seed,
//! parameters) plus a dataset checksum, so an artifact can be validated
//! against the exact data it was generated from and regenerated bit for bit.

pub mod csv_io;
pub mod dataset;
pub mod idx;
pub mod noisy;

pub use csv_io::load_csv;
pub use dataset::{checksum_hex, split, subsample, Dataset, SplitFractions, Splits};
pub use idx::{load_idx, write_idx_images, write_idx_labels};
pub use noisy::{load_noisy_labels, save_noisy_labels, to_canonical_bytes, NoisyLabelSet, SplitLabels};

use thiserror::Error;

/// Errors produced while loading, validating or persisting datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad IDX magic: expected {expected:#010x}, got {got:#010x}")]
    IdxMagic { path: String, expected: u32, got: u32 },

    #[error("{path}: malformed input: {detail}")]
    Format { path: String, detail: String },

    #[error("csv parse failure: {0}")]
    Csv(#[from] csv::Error),

    #[error("json failure: {0}")]
    Json(#[from] serde_json::Error),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("label {label} at row {row} is out of range for {class_count} classes")]
    LabelRange {
        row: usize,
        label: usize,
        class_count: usize,
    },

    #[error("invalid split fractions: {0}")]
    SplitFractions(String),

    #[error("subsample fraction {fraction} leaves class {class} empty")]
    EmptyClass { fraction: f64, class: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("noisy label set checksum {artifact} does not match dataset checksum {dataset}")]
    ChecksumMismatch { artifact: String, dataset: String },

    #[error("unsupported noisy label set schema version {0}")]
    SchemaVersion(u32),

    #[error("noisy label set failed validation: {0}")]
    Validation(String),

    #[error(transparent)]
    Nn(#[from] nn_core::NnError),
}

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}
