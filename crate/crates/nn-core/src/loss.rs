//! Tempered softmax, cross-entropy and the distillation objective.
//!
//! Cross-entropy clamps probabilities at `LOG_CLAMP` before taking logs so a
//! zero probability yields a large finite loss instead of infinity.

use crate::{Matrix, NnError};

/// Lower clamp applied to probabilities inside logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

/// Row-wise softmax with temperature: `q_i = exp(z_i / T) / sum_j exp(z_j / T)`.
///
/// Computed with the row maximum subtracted first, which is exact for the
/// same result and avoids overflow. Temperature must be positive and finite.
pub fn softmax_temperature(logits: &Matrix, temperature: f64) -> Result<Matrix, NnError> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(NnError::InvalidParameter(format!(
            "softmax temperature must be positive and finite, got {temperature}"
        )));
    }
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out_row = out.row_mut(r);
        let mut sum = 0.0;
        for (o, &z) in out_row.iter_mut().zip(row) {
            let e = ((z - max) / temperature).exp();
            *o = e;
            sum += e;
        }
        for o in out_row.iter_mut() {
            *o /= sum;
        }
    }
    Ok(out)
}

/// One-hot encoding of integer labels into an `n x class_count` matrix.
pub fn one_hot(labels: &[usize], class_count: usize) -> Result<Matrix, NnError> {
    let mut out = Matrix::zeros(labels.len(), class_count);
    for (i, &l) in labels.iter().enumerate() {
        if l >= class_count {
            return Err(NnError::InvalidParameter(format!(
                "label {l} at row {i} is out of range for {class_count} classes"
            )));
        }
        out.set(i, l, 1.0);
    }
    Ok(out)
}

/// Mean cross-entropy between probability rows and target distribution rows.
///
/// Every probability row must sum to 1 within 1e-6. Targets may be one-hot
/// or soft distributions.
pub fn cross_entropy(probabilities: &Matrix, targets: &Matrix) -> Result<f64, NnError> {
    if probabilities.rows() != targets.rows() || probabilities.cols() != targets.cols() {
        return Err(NnError::DimensionMismatch {
            op: "cross_entropy",
            left: format!("{}x{}", probabilities.rows(), probabilities.cols()),
            right: format!("{}x{}", targets.rows(), targets.cols()),
        });
    }
    if probabilities.rows() == 0 {
        return Err(NnError::EmptyInput("cross_entropy got no rows"));
    }
    let mut total = 0.0;
    for r in 0..probabilities.rows() {
        let p_row = probabilities.row(r);
        let sum: f64 = p_row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(NnError::InvalidParameter(format!(
                "probability row {r} sums to {sum}, not 1"
            )));
        }
        for (&p, &t) in p_row.iter().zip(targets.row(r)) {
            if t != 0.0 {
                total -= t * p.max(LOG_CLAMP).ln();
            }
        }
    }
    Ok(total / probabilities.rows() as f64)
}

/// Per-row cross-entropy against integer labels: `-ln p[label]` for each row.
pub fn per_row_cross_entropy(
    probabilities: &Matrix,
    labels: &[usize],
) -> Result<Vec<f64>, NnError> {
    if probabilities.rows() != labels.len() {
        return Err(NnError::DimensionMismatch {
            op: "per_row_cross_entropy",
            left: format!("{} probability rows", probabilities.rows()),
            right: format!("{} labels", labels.len()),
        });
    }
    labels
        .iter()
        .enumerate()
        .map(|(r, &l)| {
            if l >= probabilities.cols() {
                return Err(NnError::InvalidParameter(format!(
                    "label {l} at row {r} is out of range for {} classes",
                    probabilities.cols()
                )));
            }
            Ok(-probabilities.get(r, l).max(LOG_CLAMP).ln())
        })
        .collect()
}

/// Distillation objective on logits:
/// `alpha * ce(one_hot(hard), softmax_1(logits)) + (1 - alpha) * ce(soft, softmax_T(logits))`.
///
/// The soft term uses the same temperature that produced the soft targets and
/// is not rescaled by `T^2`.
pub fn distillation_loss(
    logits: &Matrix,
    hard_labels: &[usize],
    soft_targets: &Matrix,
    alpha: f64,
    temperature: f64,
) -> Result<f64, NnError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(NnError::InvalidParameter(format!(
            "distillation alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if logits.rows() != hard_labels.len() {
        return Err(NnError::DimensionMismatch {
            op: "distillation_loss",
            left: format!("{} logit rows", logits.rows()),
            right: format!("{} hard labels", hard_labels.len()),
        });
    }
    let hard = one_hot(hard_labels, logits.cols())?;
    let hard_term = cross_entropy(&softmax_temperature(logits, 1.0)?, &hard)?;
    let soft_term = cross_entropy(&softmax_temperature(logits, temperature)?, soft_targets)?;
    Ok(alpha * hard_term + (1.0 - alpha) * soft_term)
}

/// Gradient of mean tempered softmax cross-entropy with respect to logits:
/// `(softmax_T(logits) - targets) / (T * rows)`.
pub fn softmax_ce_grad(
    logits: &Matrix,
    targets: &Matrix,
    temperature: f64,
) -> Result<Matrix, NnError> {
    if logits.rows() != targets.rows() || logits.cols() != targets.cols() {
        return Err(NnError::DimensionMismatch {
            op: "softmax_ce_grad",
            left: format!("{}x{}", logits.rows(), logits.cols()),
            right: format!("{}x{}", targets.rows(), targets.cols()),
        });
    }
    let mut grad = softmax_temperature(logits, temperature)?;
    let scale = 1.0 / (temperature * logits.rows() as f64);
    for (g, &t) in grad.data_mut().iter_mut().zip(targets.data()) {
        *g = (*g - t) * scale;
    }
    Ok(grad)
}
