//! The noisy-label artifact: corrupted labels plus provenance.
//!
//! Serialization is a single compact JSON document with a fixed field order
//! and sorted maps, so the same artifact always produces the same bytes.
//! Loading validates the artifact against the dataset it claims to describe:
//! checksum, index coverage, label ranges and flip-mask consistency.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{DataError, Dataset};

pub const SCHEMA_VERSION: u32 = 1;

/// Corrupted labels for one named split, used to assemble an artifact.
pub struct SplitLabels<'a> {
    pub name: &'a str,
    /// Dataset row indices covered by this split, strictly ascending.
    pub rows: &'a [usize],
    /// Corrupted labels, parallel to `rows`.
    pub labels: &'a [usize],
}

/// Corrupted labels plus the provenance needed to validate and regenerate
/// them. Original dataset labels are never modified; consumers overlay these
/// on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyLabelSet {
    pub schema_version: u32,
    pub toolkit_version: String,
    /// Checksum of the dataset this artifact was generated from, as 16 hex
    /// digits.
    pub dataset_checksum: String,
    pub noise_type: String,
    pub target_ratio: f64,
    pub realized_ratio: f64,
    pub seed: u64,
    /// Generator-specific parameters, stringified.
    pub params: BTreeMap<String, String>,
    /// Dataset row indices covered per split, ascending within each split.
    pub split_coverage: BTreeMap<String, Vec<usize>>,
    /// Corrupted labels, concatenated over splits in key order.
    pub labels: Vec<usize>,
    /// Whether each covered label differs from the original, parallel to
    /// `labels`.
    pub flipped: Vec<bool>,
}

impl NoisyLabelSet {
    /// Assembles an artifact from per-split corrupted labels, computing the
    /// flip mask, realized ratio and dataset checksum.
    pub fn build(
        dataset: &Dataset,
        noise_type: &str,
        target_ratio: f64,
        seed: u64,
        params: BTreeMap<String, String>,
        splits: &[SplitLabels<'_>],
    ) -> Result<Self, DataError> {
        let mut split_coverage = BTreeMap::new();
        for s in splits {
            if s.rows.len() != s.labels.len() {
                return Err(DataError::Validation(format!(
                    "split '{}' has {} rows but {} labels",
                    s.name,
                    s.rows.len(),
                    s.labels.len()
                )));
            }
            if split_coverage.insert(s.name.to_string(), s.rows.to_vec()).is_some() {
                return Err(DataError::Validation(format!("duplicate split '{}'", s.name)));
            }
        }

        let mut labels = Vec::new();
        let mut flipped = Vec::new();
        let mut splits_sorted: Vec<&SplitLabels> = splits.iter().collect();
        splits_sorted.sort_by_key(|s| s.name);
        for s in splits_sorted {
            for (&row, &label) in s.rows.iter().zip(s.labels) {
                if row >= dataset.len() {
                    return Err(DataError::Validation(format!(
                        "split '{}' covers row {row} beyond dataset length {}",
                        s.name,
                        dataset.len()
                    )));
                }
                if label >= dataset.class_count {
                    return Err(DataError::LabelRange {
                        row,
                        label,
                        class_count: dataset.class_count,
                    });
                }
                labels.push(label);
                flipped.push(label != dataset.labels[row]);
            }
        }
        if labels.is_empty() {
            return Err(DataError::Validation("artifact covers no rows".into()));
        }

        let flips = flipped.iter().filter(|&&f| f).count();
        let set = NoisyLabelSet {
            schema_version: SCHEMA_VERSION,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_checksum: crate::checksum_hex(dataset),
            noise_type: noise_type.to_string(),
            target_ratio,
            realized_ratio: flips as f64 / labels.len() as f64,
            seed,
            params,
            split_coverage,
            labels,
            flipped,
        };
        set.validate(dataset)?;
        Ok(set)
    }

    /// Checks internal consistency and agreement with the given dataset.
    pub fn validate(&self, dataset: &Dataset) -> Result<(), DataError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(DataError::SchemaVersion(self.schema_version));
        }
        let dataset_checksum = crate::checksum_hex(dataset);
        if self.dataset_checksum != dataset_checksum {
            return Err(DataError::ChecksumMismatch {
                artifact: self.dataset_checksum.clone(),
                dataset: dataset_checksum,
            });
        }

        let covered: usize = self.split_coverage.values().map(|v| v.len()).sum();
        if covered != self.labels.len() || covered != self.flipped.len() {
            return Err(DataError::Validation(format!(
                "coverage lists {covered} rows but artifact has {} labels and {} flip flags",
                self.labels.len(),
                self.flipped.len()
            )));
        }

        let mut seen = vec![false; dataset.len()];
        let mut cursor = 0usize;
        for (name, rows) in &self.split_coverage {
            let mut last: Option<usize> = None;
            for &row in rows {
                if row >= dataset.len() {
                    return Err(DataError::Validation(format!(
                        "split '{name}' covers row {row} beyond dataset length {}",
                        dataset.len()
                    )));
                }
                if last.is_some_and(|l| l >= row) {
                    return Err(DataError::Validation(format!(
                        "split '{name}' indices are not strictly ascending"
                    )));
                }
                if seen[row] {
                    return Err(DataError::Validation(format!(
                        "row {row} is covered by more than one split"
                    )));
                }
                seen[row] = true;
                last = Some(row);

                let label = self.labels[cursor];
                if label >= dataset.class_count {
                    return Err(DataError::LabelRange {
                        row,
                        label,
                        class_count: dataset.class_count,
                    });
                }
                let is_flip = label != dataset.labels[row];
                if self.flipped[cursor] != is_flip {
                    return Err(DataError::Validation(format!(
                        "flip flag at row {row} says {} but labels say {}",
                        self.flipped[cursor], is_flip
                    )));
                }
                cursor += 1;
            }
        }

        let flips = self.flipped.iter().filter(|&&f| f).count();
        let realized = flips as f64 / self.labels.len().max(1) as f64;
        if (realized - self.realized_ratio).abs() > 1e-9 {
            return Err(DataError::Validation(format!(
                "recorded realized ratio {} does not match mask ratio {realized}",
                self.realized_ratio
            )));
        }
        Ok(())
    }

    /// Full-length label vector: original labels with the covered rows
    /// replaced by their corrupted values.
    pub fn overlay(&self, dataset: &Dataset) -> Vec<usize> {
        let mut labels = dataset.labels.clone();
        let mut cursor = 0usize;
        for rows in self.split_coverage.values() {
            for &row in rows {
                labels[row] = self.labels[cursor];
                cursor += 1;
            }
        }
        labels
    }

    /// Number of covered rows whose label changed.
    pub fn flip_count(&self) -> usize {
        self.flipped.iter().filter(|&&f| f).count()
    }
}

/// Serializes an artifact to its canonical byte representation.
pub fn to_canonical_bytes(set: &NoisyLabelSet) -> Result<Vec<u8>, DataError> {
    let mut bytes = serde_json::to_vec(set)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes an artifact as canonical JSON.
pub fn save_noisy_labels(path: &Path, set: &NoisyLabelSet) -> Result<(), DataError> {
    std::fs::write(path, to_canonical_bytes(set)?).map_err(|e| crate::io_err(path, e))
}

/// Reads an artifact and validates it against the dataset it describes.
pub fn load_noisy_labels(path: &Path, dataset: &Dataset) -> Result<NoisyLabelSet, DataError> {
    let bytes = std::fs::read(path).map_err(|e| crate::io_err(path, e))?;
    let set: NoisyLabelSet = serde_json::from_slice(&bytes)?;
    set.validate(dataset)?;
    Ok(set)
}
