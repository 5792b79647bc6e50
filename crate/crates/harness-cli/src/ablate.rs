//! Dropout ablation: the same experiment with and without dropout.
//!
//! Both arms run the full pipeline under identical seeds. The zero-dropout
//! arm is exactly the configured run with every dropout rate forced to zero,
//! so models whose corruption step itself trains networks (class-dependent,
//! feature-dependent) also feel the ablation there.

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::run::{run_single, RunReport};
use crate::HarnessError;

/// Paired reports for one noise type.
#[derive(Debug, Clone, Serialize)]
pub struct DropoutAblation {
    pub with_dropout: RunReport,
    pub without_dropout: RunReport,
}

impl DropoutAblation {
    /// Relative test-accuracy increase from enabling dropout.
    pub fn relative_gain(&self) -> f64 {
        let with = self.with_dropout.final_test_accuracy;
        let without = self.without_dropout.final_test_accuracy;
        (with - without) / without
    }
}

/// Runs the configured experiment with its dropout rates and again with all
/// rates zero, under the same seeds.
pub fn dropout_ablation(config: &ExperimentConfig) -> Result<DropoutAblation, HarnessError> {
    config.validate()?;
    let sizes = config.layer_sizes()?;
    if sizes.len() < 3 {
        return Err(HarnessError::config(
            "dropout ablation needs an architecture with at least one hidden layer".to_string(),
        ));
    }
    let with_dropout = run_single(config)?.report;
    let mut zeroed = config.clone();
    zeroed.drop = config.zero_dropout_string()?;
    let without_dropout = run_single(&zeroed)?.report;
    Ok(DropoutAblation { with_dropout, without_dropout })
}

/// CSV table over noise types, one row per ablation pair.
pub fn ablation_table(ablations: &[DropoutAblation]) -> String {
    let mut table =
        String::from("noise_type,test_with_dropout,test_without_dropout,relative_gain\n");
    for ablation in ablations {
        table.push_str(&format!(
            "{},{},{},{}\n",
            ablation.with_dropout.noise_type,
            ablation.with_dropout.final_test_accuracy,
            ablation.without_dropout.final_test_accuracy,
            ablation.relative_gain()
        ));
    }
    table
}
