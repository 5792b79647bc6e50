//! Mini-batch training loop over pluggable batch objectives.
//!
//! The loop owns two ChaCha streams derived from the config seed: one for the
//! per-epoch shuffle and one for dropout masks. Keeping them separate means a
//! run with dropout disabled consumes exactly the same shuffle sequence as a
//! run with dropout enabled.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::loss::{distillation_loss, one_hot, per_row_cross_entropy, softmax_ce_grad, softmax_temperature};
use crate::optim::{lr_schedule, sgd_momentum_step, Velocity};
use crate::{FeedForwardNet, ForwardMode, Matrix, NnError};

/// Salt xored into the run seed to derive the dropout stream, keeping it
/// independent of the shuffle stream. Exposed so alternative training loops
/// can reproduce [`train`]'s randomness exactly.
pub const DROPOUT_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Hyperparameters for one training run.
#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub momentum: f64,
    pub halving_period: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 64,
            base_lr: 0.1,
            momentum: 0.9,
            halving_period: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.batch_size == 0 {
            return Err(NnError::InvalidParameter("batch size must be positive".into()));
        }
        if !(self.base_lr.is_finite() && self.base_lr >= 0.0) {
            return Err(NnError::InvalidParameter(format!(
                "learning rate must be finite and non-negative, got {}",
                self.base_lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NnError::InvalidParameter(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.halving_period == 0 {
            return Err(NnError::InvalidParameter("halving period must be positive".into()));
        }
        Ok(())
    }
}

/// Metrics recorded after each epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_accuracy: Option<f64>,
}

/// Per-epoch history of one training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn final_train_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_accuracy)
    }

    pub fn final_val_accuracy(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.val_accuracy)
    }
}

/// A loss evaluated on batch logits.
///
/// `rows` holds the positions of the batch rows within the training split, so
/// implementations can look up per-row targets. The returned gradient is the
/// derivative of the scalar loss with respect to the logits.
pub trait BatchObjective {
    fn loss_and_grad(&self, logits: &Matrix, rows: &[usize]) -> Result<(f64, Matrix), NnError>;
}

/// Standard cross-entropy against integer labels.
pub struct HardLabelObjective<'a> {
    pub labels: &'a [usize],
}

impl BatchObjective for HardLabelObjective<'_> {
    fn loss_and_grad(&self, logits: &Matrix, rows: &[usize]) -> Result<(f64, Matrix), NnError> {
        let batch_labels: Vec<usize> = rows.iter().map(|&r| self.labels[r]).collect();
        let probs = softmax_temperature(logits, 1.0)?;
        let losses = per_row_cross_entropy(&probs, &batch_labels)?;
        let loss = losses.iter().sum::<f64>() / losses.len() as f64;
        let grad = softmax_ce_grad(logits, &one_hot(&batch_labels, logits.cols())?, 1.0)?;
        Ok((loss, grad))
    }
}

/// Distillation objective mixing hard labels with tempered soft targets.
pub struct DistillObjective<'a> {
    pub hard_labels: &'a [usize],
    /// One soft-target row per training-split row, aligned with `hard_labels`.
    pub soft_targets: &'a Matrix,
    pub alpha: f64,
    pub temperature: f64,
}

impl BatchObjective for DistillObjective<'_> {
    fn loss_and_grad(&self, logits: &Matrix, rows: &[usize]) -> Result<(f64, Matrix), NnError> {
        let batch_labels: Vec<usize> = rows.iter().map(|&r| self.hard_labels[r]).collect();
        let soft = self.soft_targets.select_rows(rows)?;
        let loss = distillation_loss(logits, &batch_labels, &soft, self.alpha, self.temperature)?;

        let hard_grad = softmax_ce_grad(logits, &one_hot(&batch_labels, logits.cols())?, 1.0)?;
        let soft_grad = softmax_ce_grad(logits, &soft, self.temperature)?;
        let mut grad = hard_grad;
        for (g, &s) in grad.data_mut().iter_mut().zip(soft_grad.data()) {
            *g = self.alpha * *g + (1.0 - self.alpha) * s;
        }
        Ok((loss, grad))
    }
}

/// Fraction of positions where `predictions[i] == labels[i]`.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    correct as f64 / predictions.len() as f64
}

/// Argmax evaluation accuracy of a network on a feature/label split.
pub fn evaluate_accuracy(
    net: &FeedForwardNet,
    features: &Matrix,
    labels: &[usize],
) -> Result<f64, NnError> {
    if features.rows() != labels.len() {
        return Err(NnError::DimensionMismatch {
            op: "evaluate_accuracy",
            left: format!("{} feature rows", features.rows()),
            right: format!("{} labels", labels.len()),
        });
    }
    let logits = net.logits_eval(features)?;
    Ok(accuracy(&logits.argmax_rows(), labels))
}

/// Trains a network in place, returning per-epoch history.
///
/// `metric_labels` are only used for the reported train accuracy (for noisy
/// runs they are the observed labels, so the metric is agreement with the
/// labels actually trained on). Train accuracy and loss are accumulated from
/// the training-mode batches themselves; validation accuracy is measured in
/// evaluation mode after each epoch.
pub fn train<O: BatchObjective>(
    net: &mut FeedForwardNet,
    features: &Matrix,
    objective: &O,
    metric_labels: &[usize],
    val: Option<(&Matrix, &[usize])>,
    config: &TrainConfig,
) -> Result<TrainHistory, NnError> {
    config.validate()?;
    if features.rows() == 0 {
        return Err(NnError::EmptyInput("training split has no rows"));
    }
    if features.rows() != metric_labels.len() {
        return Err(NnError::DimensionMismatch {
            op: "train",
            left: format!("{} feature rows", features.rows()),
            right: format!("{} labels", metric_labels.len()),
        });
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed ^ DROPOUT_STREAM_SALT);
    let mut velocity = Velocity::zeros_like(net);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..features.rows()).collect();

    for epoch in 0..config.epochs {
        let lr = lr_schedule(config.base_lr, epoch, config.halving_period);
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            let xb = features.select_rows(batch)?;
            let cache = net.forward(&xb, ForwardMode::Train(&mut dropout_rng))?;
            let (loss, grad) = objective.loss_and_grad(cache.logits(), batch)?;
            if !loss.is_finite() {
                return Err(NnError::NumericFailure(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            loss_sum += loss * batch.len() as f64;
            let preds = cache.logits().argmax_rows();
            for (pos, &row) in batch.iter().enumerate() {
                if preds[pos] == metric_labels[row] {
                    correct += 1;
                }
            }
            let grads = net.backward(&cache, &grad)?;
            sgd_momentum_step(net, &grads, &mut velocity, lr, config.momentum)?;
        }

        let val_accuracy = match val {
            Some((vx, vy)) => Some(evaluate_accuracy(net, vx, vy)?),
            None => None,
        };
        history.epochs.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss: loss_sum / features.rows() as f64,
            train_accuracy: correct as f64 / features.rows() as f64,
            val_accuracy,
        });
    }
    Ok(history)
}
