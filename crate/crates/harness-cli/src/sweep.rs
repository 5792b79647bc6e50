//! Noise-ratio and dataset-size sweeps.
//!
//! A sweep is a list of [`run_single`] runs varying one config field, with
//! everything else (dataset, splits, seeds) shared. Each entry's report
//! stays individually rerunnable from its echoed config; the aggregated CSV
//! tables are pure functions of the reports.

use crate::config::ExperimentConfig;
use crate::run::{corrupt_dataset, execute_with, prepare_dataset, run_single, RunReport};
use crate::HarnessError;

/// Noise ratios from 5% to 75% in steps of 10%.
pub const DEFAULT_RATIOS: [f64; 8] = [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75];

/// Train-split subsample fractions for the dataset-size protocol.
pub const DEFAULT_SIZES: [f64; 5] = [0.01, 0.10, 0.40, 0.70, 1.00];

/// One run per ratio on a shared dataset.
pub fn sweep_ratios(
    config: &ExperimentConfig,
    ratios: &[f64],
) -> Result<Vec<RunReport>, HarnessError> {
    if ratios.is_empty() {
        return Err(HarnessError::config("ratio sweep needs at least one ratio".to_string()));
    }
    if !config.labels.is_empty() {
        return Err(HarnessError::config(
            "a ratio sweep generates its own noise; drop the labels file".to_string(),
        ));
    }
    let dataset = prepare_dataset(config)?;
    let mut reports = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let mut entry = config.clone();
        entry.ratio = ratio;
        entry.validate()?;
        let corruption = corrupt_dataset(&dataset, &entry)?;
        reports.push(execute_with(&dataset, &entry, &corruption)?.report);
    }
    Ok(reports)
}

/// One run per train-split subsample fraction at a fixed noise ratio.
pub fn sweep_sizes(
    config: &ExperimentConfig,
    fractions: &[f64],
) -> Result<Vec<RunReport>, HarnessError> {
    if fractions.is_empty() {
        return Err(HarnessError::config("size sweep needs at least one fraction".to_string()));
    }
    let mut reports = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let mut entry = config.clone();
        entry.dataset_fraction = fraction;
        entry.validate()?;
        reports.push(run_single(&entry)?.report);
    }
    Ok(reports)
}

fn accuracy_cells(report: &RunReport) -> String {
    format!(
        "{},{},{}",
        report.final_train_accuracy,
        report.final_val_accuracy.map(|a| a.to_string()).unwrap_or_default(),
        report.final_test_accuracy
    )
}

/// CSV table of a ratio sweep, one row per run.
pub fn ratio_table(reports: &[RunReport]) -> String {
    let mut table = String::from("ratio,noise_type,train_acc,val_acc,test_acc\n");
    for report in reports {
        table.push_str(&format!(
            "{},{},{}\n",
            report.target_ratio,
            report.noise_type,
            accuracy_cells(report)
        ));
    }
    table
}

/// CSV table of a size sweep, one row per run.
pub fn size_table(reports: &[RunReport]) -> String {
    let mut table = String::from("fraction,noise_type,train_acc,val_acc,test_acc\n");
    for report in reports {
        let fraction = report.config.get("dataset_fraction").cloned().unwrap_or_default();
        table.push_str(&format!(
            "{},{},{}\n",
            fraction,
            report.noise_type,
            accuracy_cells(report)
        ));
    }
    table
}
