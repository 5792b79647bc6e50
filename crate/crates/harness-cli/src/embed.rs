//! Feature-embedding export for external projection tools.
//!
//! Trains (or reruns) the configured experiment, pushes the train split
//! through the final model's feature extractor and writes one CSV row per
//! instance: the penultimate activations, the clean label, the label the
//! model was actually trained on and whether the two differ. The matching
//! sparsity report lands next to the CSV.

use std::path::Path;

use data_io::Dataset;
use nn_core::Matrix;
use noise_synth::{sparsity_sigma, SparsityReport};

use crate::config::ExperimentConfig;
use crate::run::{dataset_and_corruption, execute_with, RunOutput, RunReport};
use crate::{HarnessError, Stage, ToolkitError};

struct TrainFeatures {
    rows: Vec<usize>,
    features: Matrix,
    clean: Vec<usize>,
    sparsity: SparsityReport,
}

fn train_features(dataset: &Dataset, output: &RunOutput) -> Result<TrainFeatures, HarnessError> {
    let mut rows = dataset.splits.train.clone();
    rows.sort_unstable();
    let x_train = dataset.features.select_rows(&rows).stage("export")?;
    let features = output.net.extract_features(&x_train).stage("export")?;
    let clean = dataset.split_labels(&rows);
    let sparsity = sparsity_sigma(&features, &clean, dataset.class_count).stage("export")?;
    Ok(TrainFeatures { rows, features, clean, sparsity })
}

/// Runs the experiment and returns its report plus the full sparsity report
/// of the final model's train-split features.
pub fn sigma_report(
    config: &ExperimentConfig,
) -> Result<(RunReport, SparsityReport), HarnessError> {
    let (dataset, corruption) = dataset_and_corruption(config)?;
    let output = execute_with(&dataset, config, &corruption)?;
    let computed = train_features(&dataset, &output)?;
    Ok((output.report, computed.sparsity))
}

/// Runs the experiment and writes the embedding CSV to `out_path`, plus the
/// sparsity report at the same path with a `sigma.json` extension.
pub fn export_embedding(
    config: &ExperimentConfig,
    out_path: &Path,
) -> Result<(RunReport, SparsityReport), HarnessError> {
    let (dataset, corruption) = dataset_and_corruption(config)?;
    let output = execute_with(&dataset, config, &corruption)?;
    let computed = train_features(&dataset, &output)?;
    let overlay = match &output.noisy {
        Some(artifact) => artifact.overlay(&dataset),
        None => dataset.labels.clone(),
    };

    let mut csv = String::new();
    for column in 0..computed.features.cols() {
        csv.push_str(&format!("f{column},"));
    }
    csv.push_str("clean_label,noisy_label,flipped\n");
    for (position, &row) in computed.rows.iter().enumerate() {
        for value in computed.features.row(position) {
            csv.push_str(&format!("{value},"));
        }
        let clean = computed.clean[position];
        let noisy = overlay[row];
        let flipped = u8::from(noisy != clean);
        csv.push_str(&format!("{clean},{noisy},{flipped}\n"));
    }
    std::fs::write(out_path, csv).map_err(ToolkitError::Io).stage("export")?;

    let mut sigma_json = serde_json::to_string_pretty(&computed.sparsity)
        .map_err(data_io::DataError::Json)
        .stage("export")?;
    sigma_json.push('\n');
    std::fs::write(out_path.with_extension("sigma.json"), sigma_json)
        .map_err(ToolkitError::Io)
        .stage("export")?;

    Ok((output.report, computed.sparsity))
}
