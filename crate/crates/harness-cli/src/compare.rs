//! Noise-robust method comparison on a shared corruption.
//!
//! All methods see exactly the same dataset, splits and noisy labels; only
//! the training objective changes. Reports stay individually rerunnable
//! because the corruption is a deterministic function of the config.

use crate::config::{ExperimentConfig, RobustMethod};
use crate::run::{dataset_and_corruption, execute_with, RunReport};
use crate::HarnessError;

/// One method's result within a comparison.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub method: RobustMethod,
    pub report: RunReport,
}

/// Runs each method once against the same corrupted dataset.
pub fn compare_robust(
    config: &ExperimentConfig,
    methods: &[RobustMethod],
) -> Result<Vec<CompareRow>, HarnessError> {
    if methods.is_empty() {
        return Err(HarnessError::config(
            "compare-robust needs at least one method".to_string(),
        ));
    }
    let (dataset, corruption) = dataset_and_corruption(config)?;
    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut entry = config.clone();
        entry.robust = method;
        entry.validate()?;
        let report = execute_with(&dataset, &entry, &corruption)?.report;
        rows.push(CompareRow { method, report });
    }
    Ok(rows)
}

/// CSV table of test accuracies: one row per noise type, one column per
/// method. Methods appear in first-encounter order; a missing combination
/// leaves its cell empty.
pub fn compare_table(rows: &[CompareRow]) -> String {
    let mut methods: Vec<RobustMethod> = Vec::new();
    let mut noise_types: Vec<String> = Vec::new();
    for row in rows {
        if !methods.contains(&row.method) {
            methods.push(row.method);
        }
        if !noise_types.contains(&row.report.noise_type) {
            noise_types.push(row.report.noise_type.clone());
        }
    }

    let mut table = String::from("noise_type");
    for method in &methods {
        table.push(',');
        table.push_str(method.as_str());
    }
    table.push('\n');

    for noise_type in &noise_types {
        table.push_str(noise_type);
        for method in &methods {
            table.push(',');
            let cell = rows
                .iter()
                .find(|r| r.method == *method && r.report.noise_type == *noise_type)
                .map(|r| r.report.final_test_accuracy.to_string())
                .unwrap_or_default();
            table.push_str(&cell);
        }
        table.push('\n');
    }
    table
}
