//! Step-halving learning-rate schedule and SGD with classical momentum.

use crate::{FeedForwardNet, Gradients, Matrix, NnError};

/// Learning rate for an epoch: `base_lr * 0.5^floor(epoch / halving_period)`.
///
/// Epochs are zero-based, so the first halving takes effect at
/// `epoch == halving_period`.
pub fn lr_schedule(base_lr: f64, epoch: usize, halving_period: usize) -> f64 {
    assert!(halving_period > 0, "halving period must be positive");
    base_lr * 0.5f64.powi((epoch / halving_period) as i32)
}

/// Momentum buffers shaped like a network's parameters.
pub struct Velocity {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Matrix>,
}

impl Velocity {
    /// Zero-initialized buffers matching the given network.
    pub fn zeros_like(net: &FeedForwardNet) -> Self {
        Velocity {
            weights: net
                .weights()
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: net
                .biases()
                .iter()
                .map(|b| Matrix::zeros(b.rows(), b.cols()))
                .collect(),
        }
    }
}

/// One classical-momentum update:
/// `v <- momentum * v - lr * grad; param <- param + v`.
pub fn sgd_momentum_step(
    net: &mut FeedForwardNet,
    grads: &Gradients,
    velocity: &mut Velocity,
    lr: f64,
    momentum: f64,
) -> Result<(), NnError> {
    if grads.weights.len() != net.weights().len() || grads.biases.len() != net.biases().len() {
        return Err(NnError::InvalidParameter(
            "gradient layer count does not match network".to_string(),
        ));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(NnError::InvalidParameter(format!(
            "momentum must lie in [0, 1), got {momentum}"
        )));
    }

    for l in 0..grads.weights.len() {
        apply(
            net.weights_mut()[l].data_mut(),
            grads.weights[l].data(),
            velocity.weights[l].data_mut(),
            lr,
            momentum,
            l,
        )?;
        apply(
            net.biases_mut()[l].data_mut(),
            grads.biases[l].data(),
            velocity.biases[l].data_mut(),
            lr,
            momentum,
            l,
        )?;
    }
    Ok(())
}

fn apply(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
    layer: usize,
) -> Result<(), NnError> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(NnError::InvalidParameter(format!(
            "gradient shape does not match parameters at layer {layer}"
        )));
    }
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
    Ok(())
}
