//! Forward loss correction with a known transition matrix.
//!
//! The network's class posterior `p` is pushed through the transition matrix
//! to get the distribution over observed labels, `corrected = Nᵀ·p` per
//! instance, and cross-entropy is taken against the noisy label there. With
//! the true matrix the minimizer of the corrected loss is the clean
//! posterior.

use nn_core::loss::LOG_CLAMP;
use nn_core::{softmax_temperature, BatchObjective, Matrix, NnError};
use noise_synth::TransitionMatrix;

use crate::{check_labels, check_probability_rows, RobustError};

fn transition_as_matrix(transition: &TransitionMatrix) -> Result<Matrix, NnError> {
    let size = transition.size();
    let mut data = Vec::with_capacity(size * size);
    for row in 0..size {
        for col in 0..size {
            data.push(transition.get(row, col));
        }
    }
    Matrix::from_vec(size, size, data)
}

/// Distribution over observed labels for each row: `corrected[r][j]` is the
/// probability of observing label `j` when the clean posterior is row `r`.
pub fn forward_corrected_probs(
    probabilities: &Matrix,
    transition: &TransitionMatrix,
) -> Result<Matrix, RobustError> {
    if probabilities.cols() != transition.size() {
        return Err(RobustError::DimensionMismatch(format!(
            "{} probability columns vs transition size {}",
            probabilities.cols(),
            transition.size()
        )));
    }
    check_probability_rows(probabilities)?;
    Ok(probabilities.matmul(&transition_as_matrix(transition)?)?)
}

/// Mean cross-entropy of the noisy labels against the corrected
/// distributions.
pub fn forward_corrected_loss(
    probabilities: &Matrix,
    transition: &TransitionMatrix,
    noisy_labels: &[usize],
) -> Result<f64, RobustError> {
    if probabilities.rows() == 0 {
        return Err(RobustError::EmptyInput("forward correction needs rows"));
    }
    if noisy_labels.len() != probabilities.rows() {
        return Err(RobustError::DimensionMismatch(format!(
            "{} probability rows vs {} labels",
            probabilities.rows(),
            noisy_labels.len()
        )));
    }
    check_labels(noisy_labels, transition.size())?;
    let corrected = forward_corrected_probs(probabilities, transition)?;
    let mut loss_sum = 0.0;
    for (row, &label) in noisy_labels.iter().enumerate() {
        loss_sum += -corrected.get(row, label).max(LOG_CLAMP).ln();
    }
    Ok(loss_sum / noisy_labels.len() as f64)
}

/// Batch objective training against the forward-corrected loss.
///
/// The gradient with respect to the logits is analytic: for a row with noisy
/// label `y` and corrected mass `s = corrected[y]`, entry `j` is
/// `p[j] * (1 - N[j][y] / s)` divided by the batch size.
pub struct ForwardObjective<'a> {
    labels: &'a [usize],
    transition: Matrix,
}

impl<'a> ForwardObjective<'a> {
    /// `labels` holds the observed label for every training-split row.
    pub fn new(labels: &'a [usize], transition: &TransitionMatrix) -> Result<Self, RobustError> {
        check_labels(labels, transition.size())?;
        Ok(ForwardObjective { labels, transition: transition_as_matrix(transition)? })
    }
}

impl BatchObjective for ForwardObjective<'_> {
    fn loss_and_grad(&self, logits: &Matrix, rows: &[usize]) -> Result<(f64, Matrix), NnError> {
        let batch_labels: Vec<usize> = rows.iter().map(|&r| self.labels[r]).collect();
        let probs = softmax_temperature(logits, 1.0)?;
        let corrected = probs.matmul(&self.transition)?;

        let mut loss_sum = 0.0;
        let mut grad = Matrix::zeros(logits.rows(), logits.cols());
        let scale = 1.0 / logits.rows() as f64;
        for (row, &label) in batch_labels.iter().enumerate() {
            let s = corrected.get(row, label).max(LOG_CLAMP);
            loss_sum += -s.ln();
            for j in 0..logits.cols() {
                let coupling = self.transition.get(j, label);
                grad.set(row, j, probs.get(row, j) * (1.0 - coupling / s) * scale);
            }
        }
        Ok((loss_sum / batch_labels.len() as f64, grad))
    }
}
