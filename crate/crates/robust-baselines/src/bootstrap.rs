//! Bootstrapping: cross-entropy against a mixture of the given label and the
//! network's own prediction.
//!
//! The target for each instance is `beta * onehot(label) + (1 - beta) * q`,
//! where `q` is the predicted distribution in soft mode and the one-hot
//! argmax prediction in hard mode. Targets are treated as constants when
//! differentiating, so the gradient is the usual softmax cross-entropy
//! gradient against the mixed target.

use nn_core::loss::LOG_CLAMP;
use nn_core::{softmax_ce_grad, softmax_temperature, BatchObjective, Matrix, NnError};

use crate::{check_labels, check_probability_rows, RobustError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootstrapMode {
    /// Mix in the full predicted distribution.
    Soft,
    /// Mix in the one-hot argmax prediction, ties to the lower class.
    Hard,
}

/// Mixture targets `beta * onehot(label) + (1 - beta) * prediction` per row.
pub fn bootstrap_targets(
    probabilities: &Matrix,
    labels: &[usize],
    beta: f64,
    mode: BootstrapMode,
) -> Result<Matrix, RobustError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(RobustError::BetaOutOfRange(beta));
    }
    if probabilities.rows() != labels.len() {
        return Err(RobustError::DimensionMismatch(format!(
            "{} probability rows vs {} labels",
            probabilities.rows(),
            labels.len()
        )));
    }
    check_labels(labels, probabilities.cols())?;
    check_probability_rows(probabilities)?;

    let predicted_classes = probabilities.argmax_rows();
    let mut targets = Matrix::zeros(probabilities.rows(), probabilities.cols());
    for row in 0..probabilities.rows() {
        for col in 0..probabilities.cols() {
            let hard = if col == labels[row] { 1.0 } else { 0.0 };
            let prediction = match mode {
                BootstrapMode::Soft => probabilities.get(row, col),
                BootstrapMode::Hard => {
                    if col == predicted_classes[row] {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            targets.set(row, col, beta * hard + (1.0 - beta) * prediction);
        }
    }
    Ok(targets)
}

/// Mean cross-entropy of the predictions against their bootstrap targets.
pub fn bootstrap_loss(
    probabilities: &Matrix,
    labels: &[usize],
    beta: f64,
    mode: BootstrapMode,
) -> Result<f64, RobustError> {
    if probabilities.rows() == 0 {
        return Err(RobustError::EmptyInput("bootstrap needs rows"));
    }
    let targets = bootstrap_targets(probabilities, labels, beta, mode)?;
    let mut loss_sum = 0.0;
    for row in 0..probabilities.rows() {
        for col in 0..probabilities.cols() {
            let t = targets.get(row, col);
            if t > 0.0 {
                loss_sum += -t * probabilities.get(row, col).max(LOG_CLAMP).ln();
            }
        }
    }
    Ok(loss_sum / probabilities.rows() as f64)
}

/// Batch objective training against the bootstrap loss with detached
/// targets.
pub struct BootstrapObjective<'a> {
    /// Observed label for every training-split row.
    pub labels: &'a [usize],
    pub beta: f64,
    pub mode: BootstrapMode,
}

impl BatchObjective for BootstrapObjective<'_> {
    fn loss_and_grad(&self, logits: &Matrix, rows: &[usize]) -> Result<(f64, Matrix), NnError> {
        let batch_labels: Vec<usize> = rows.iter().map(|&r| self.labels[r]).collect();
        let probs = softmax_temperature(logits, 1.0)?;
        let targets = bootstrap_targets(&probs, &batch_labels, self.beta, self.mode)
            .map_err(|e| NnError::InvalidParameter(e.to_string()))?;
        let loss = bootstrap_loss(&probs, &batch_labels, self.beta, self.mode)
            .map_err(|e| NnError::InvalidParameter(e.to_string()))?;
        let grad = softmax_ce_grad(logits, &targets, 1.0)?;
        Ok((loss, grad))
    }
}
