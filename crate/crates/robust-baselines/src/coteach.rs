//! Co-teaching: two networks train side by side and each updates only on the
//! batch instances its peer considers easiest.
//!
//! Per mini-batch both nets forward the same rows; each computes per-instance
//! cross-entropy losses, and each net back-propagates only the
//! `ceil((1 - tau) * batch)` instances with the smallest loss under its peer.
//! The forget rate `tau` ramps linearly from zero to `tau_max` over the
//! warmup epochs and then stays constant, so early training sees every
//! instance and later training drops the suspected noisy ones. With
//! `tau_max = 0` every step reduces to a plain training step, and each net's
//! trajectory is bit-identical to [`nn_core::train`] under the same run seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nn_core::{
    evaluate_accuracy, lr_schedule, per_row_cross_entropy, sgd_momentum_step,
    softmax_temperature, EpochRecord, FeedForwardNet, ForwardMode, Matrix, TrainConfig,
    TrainHistory, Velocity, DROPOUT_STREAM_SALT,
};

use crate::{check_labels, RobustError};

/// Epochs over which the forget rate ramps up, matching the warmup the
/// method's authors tie to early memorization.
pub const DEFAULT_WARMUP_EPOCHS: usize = 10;

/// Linear forget-rate ramp: zero at epoch zero, `tau_max` from the end of
/// warmup onward.
#[derive(Debug, Clone)]
pub struct ForgetSchedule {
    tau_max: f64,
    warmup_epochs: usize,
}

impl ForgetSchedule {
    pub fn new(tau_max: f64, warmup_epochs: usize) -> Result<Self, RobustError> {
        if !(0.0..1.0).contains(&tau_max) {
            return Err(RobustError::ForgetRateOutOfRange(tau_max));
        }
        Ok(ForgetSchedule { tau_max, warmup_epochs })
    }

    pub fn tau(&self, epoch: usize) -> f64 {
        if self.warmup_epochs == 0 {
            return self.tau_max;
        }
        self.tau_max * (epoch as f64 / self.warmup_epochs as f64).min(1.0)
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }
}

/// Positions of the `ceil((1 - tau) * len)` smallest peer losses, ascending.
///
/// Ties break toward the lower index. Panics if `tau` lies outside `[0, 1)`;
/// schedules built through [`ForgetSchedule::new`] cannot produce such values.
pub fn small_loss_selection(peer_losses: &[f64], tau: f64) -> Vec<usize> {
    assert!((0.0..1.0).contains(&tau), "forget rate {tau} outside [0, 1)");
    let keep = ((1.0 - tau) * peer_losses.len() as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..peer_losses.len()).collect();
    order.sort_by(|&a, &b| peer_losses[a].total_cmp(&peer_losses[b]).then(a.cmp(&b)));
    order.truncate(keep);
    order.sort_unstable();
    order
}

/// The two peer networks with their optimizer state and forget schedule.
pub struct CoTeachingState {
    pub net_a: FeedForwardNet,
    pub net_b: FeedForwardNet,
    velocity_a: Velocity,
    velocity_b: Velocity,
    pub schedule: ForgetSchedule,
}

impl CoTeachingState {
    /// Initializes both nets with the same architecture but independent
    /// weight seeds.
    pub fn new(
        layer_sizes: Vec<usize>,
        dropout_rates: Vec<f64>,
        seed_a: u64,
        seed_b: u64,
        schedule: ForgetSchedule,
    ) -> Result<Self, RobustError> {
        let net_a = FeedForwardNet::init(layer_sizes.clone(), dropout_rates.clone(), seed_a)?;
        let net_b = FeedForwardNet::init(layer_sizes, dropout_rates, seed_b)?;
        let velocity_a = Velocity::zeros_like(&net_a);
        let velocity_b = Velocity::zeros_like(&net_b);
        Ok(CoTeachingState { net_a, net_b, velocity_a, velocity_b, schedule })
    }
}

/// Cross-entropy gradient restricted to the selected rows, averaged over the
/// selection.
fn selected_ce_grad(
    probs: &Matrix,
    labels: &[usize],
    selected: &[usize],
) -> Matrix {
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    let scale = 1.0 / selected.len() as f64;
    for &row in selected {
        for col in 0..probs.cols() {
            let target = if col == labels[row] { 1.0 } else { 0.0 };
            grad.set(row, col, (probs.get(row, col) - target) * scale);
        }
    }
    grad
}

/// Trains the pair in place and returns both histories.
///
/// Batch order comes from `config.seed` and both nets draw dropout masks
/// from the stream [`nn_core::train`] would use, so under a zero forget rate
/// each net trains exactly as a plain run would. Reported train loss and
/// accuracy are per net: loss over its selected instances, accuracy over
/// whole batches against `noisy_labels`.
pub fn co_teaching_train(
    state: &mut CoTeachingState,
    features: &Matrix,
    noisy_labels: &[usize],
    val: Option<(&Matrix, &[usize])>,
    config: &TrainConfig,
) -> Result<(TrainHistory, TrainHistory), RobustError> {
    config.validate()?;
    if features.rows() == 0 {
        return Err(RobustError::EmptyInput("co-teaching needs training rows"));
    }
    if features.rows() != noisy_labels.len() {
        return Err(RobustError::DimensionMismatch(format!(
            "{} feature rows vs {} labels",
            features.rows(),
            noisy_labels.len()
        )));
    }
    check_labels(noisy_labels, state.net_a.class_count())?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dropout_rng_a = ChaCha8Rng::seed_from_u64(config.seed ^ DROPOUT_STREAM_SALT);
    let mut dropout_rng_b = ChaCha8Rng::seed_from_u64(config.seed ^ DROPOUT_STREAM_SALT);
    let mut history_a = TrainHistory::default();
    let mut history_b = TrainHistory::default();
    let mut order: Vec<usize> = (0..features.rows()).collect();

    for epoch in 0..config.epochs {
        let lr = lr_schedule(config.base_lr, epoch, config.halving_period);
        let tau = state.schedule.tau(epoch);
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum_a = 0.0;
        let mut loss_sum_b = 0.0;
        let mut selected_a = 0usize;
        let mut selected_b = 0usize;
        let mut correct_a = 0usize;
        let mut correct_b = 0usize;
        for batch in order.chunks(config.batch_size) {
            let xb = features.select_rows(batch)?;
            let batch_labels: Vec<usize> = batch.iter().map(|&r| noisy_labels[r]).collect();

            let cache_a = state.net_a.forward(&xb, ForwardMode::Train(&mut dropout_rng_a))?;
            let cache_b = state.net_b.forward(&xb, ForwardMode::Train(&mut dropout_rng_b))?;
            let probs_a = softmax_temperature(cache_a.logits(), 1.0)?;
            let probs_b = softmax_temperature(cache_b.logits(), 1.0)?;
            let losses_a = per_row_cross_entropy(&probs_a, &batch_labels)?;
            let losses_b = per_row_cross_entropy(&probs_b, &batch_labels)?;

            let sel_a = small_loss_selection(&losses_b, tau);
            let sel_b = small_loss_selection(&losses_a, tau);

            let batch_loss_a =
                sel_a.iter().map(|&i| losses_a[i]).sum::<f64>() / sel_a.len() as f64;
            let batch_loss_b =
                sel_b.iter().map(|&i| losses_b[i]).sum::<f64>() / sel_b.len() as f64;
            if !(batch_loss_a.is_finite() && batch_loss_b.is_finite()) {
                return Err(RobustError::Nn(nn_core::NnError::NumericFailure(format!(
                    "non-finite co-teaching loss at epoch {epoch}"
                ))));
            }
            loss_sum_a += batch_loss_a * sel_a.len() as f64;
            loss_sum_b += batch_loss_b * sel_b.len() as f64;
            selected_a += sel_a.len();
            selected_b += sel_b.len();

            for (preds, correct) in [
                (probs_a.argmax_rows(), &mut correct_a),
                (probs_b.argmax_rows(), &mut correct_b),
            ] {
                for (pos, &row) in batch.iter().enumerate() {
                    if preds[pos] == noisy_labels[row] {
                        *correct += 1;
                    }
                }
            }

            let grad_a = selected_ce_grad(&probs_a, &batch_labels, &sel_a);
            let grad_b = selected_ce_grad(&probs_b, &batch_labels, &sel_b);
            let grads_a = state.net_a.backward(&cache_a, &grad_a)?;
            let grads_b = state.net_b.backward(&cache_b, &grad_b)?;
            sgd_momentum_step(&mut state.net_a, &grads_a, &mut state.velocity_a, lr, config.momentum)?;
            sgd_momentum_step(&mut state.net_b, &grads_b, &mut state.velocity_b, lr, config.momentum)?;
        }

        let (val_a, val_b) = match val {
            Some((vx, vy)) => (
                Some(evaluate_accuracy(&state.net_a, vx, vy)?),
                Some(evaluate_accuracy(&state.net_b, vx, vy)?),
            ),
            None => (None, None),
        };
        history_a.epochs.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss: loss_sum_a / selected_a as f64,
            train_accuracy: correct_a as f64 / features.rows() as f64,
            val_accuracy: val_a,
        });
        history_b.epochs.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss: loss_sum_b / selected_b as f64,
            train_accuracy: correct_b as f64 / features.rows() as f64,
            val_accuracy: val_b,
        });
    }
    Ok((history_a, history_b))
}

/// Pair-average evaluation accuracy, the reporting rule for co-teaching runs.
pub fn co_teaching_accuracy(
    state: &CoTeachingState,
    features: &Matrix,
    labels: &[usize],
) -> Result<f64, RobustError> {
    let a = evaluate_accuracy(&state.net_a, features, labels)?;
    let b = evaluate_accuracy(&state.net_b, features, labels)?;
    Ok((a + b) / 2.0)
}
