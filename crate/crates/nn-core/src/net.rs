//! Fully connected network state, forward pass and analytic backward pass.
//!
//! Hidden layers use ReLU; the final layer emits raw logits so callers choose
//! the output transform. Dropout is the inverted variant: surviving hidden
//! units are scaled by `1 / (1 - rate)` at train time and evaluation applies
//! no mask at all, so a rate of zero is bitwise identical to evaluation mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Matrix, NnError};

/// Row chunk size for whole-split evaluation passes, which bounds the size of
/// intermediate activation buffers.
const EVAL_CHUNK: usize = 4096;

/// Feed-forward network with per-hidden-layer dropout rates.
#[derive(Clone)]
pub struct FeedForwardNet {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Matrix>,
    dropout_rates: Vec<f64>,
}

/// Intermediate state captured by a forward pass, consumed by `backward`.
pub struct ForwardCache {
    /// `activations[0]` is the input batch; `activations[l]` for `l >= 1` is
    /// the post-ReLU (and post-dropout) output of hidden layer `l`.
    activations: Vec<Matrix>,
    /// `pre_activations[l]` is the affine output of layer `l`; the last entry
    /// holds the logits.
    pre_activations: Vec<Matrix>,
    /// Scaled dropout masks per hidden layer; `None` when no mask was applied.
    dropout_masks: Vec<Option<Matrix>>,
}

impl ForwardCache {
    pub fn logits(&self) -> &Matrix {
        self.pre_activations.last().expect("cache has layers")
    }
}

/// Whether a forward pass draws dropout masks.
pub enum ForwardMode<'a> {
    /// Training mode; dropout masks are drawn from the given stream.
    Train(&'a mut ChaCha8Rng),
    /// Evaluation mode; no dropout.
    Eval,
}

/// Per-layer weight and bias gradients, shaped like the network parameters.
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Matrix>,
}

impl FeedForwardNet {
    /// Initializes a network with weights drawn uniformly from
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` and zero biases.
    ///
    /// `dropout_rates` must hold one rate per hidden layer, each in `[0, 1)`.
    /// The same seed always produces identical parameters.
    pub fn init(
        layer_sizes: Vec<usize>,
        dropout_rates: Vec<f64>,
        seed: u64,
    ) -> Result<Self, NnError> {
        if layer_sizes.len() < 2 {
            return Err(NnError::TooFewLayers(layer_sizes.len()));
        }
        if let Some(&w) = layer_sizes.iter().find(|&&w| w == 0) {
            return Err(NnError::InvalidParameter(format!(
                "layer width must be positive, got {w}"
            )));
        }
        let hidden = layer_sizes.len() - 2;
        if dropout_rates.len() != hidden {
            return Err(NnError::DropoutArity {
                expected: hidden,
                got: dropout_rates.len(),
            });
        }
        if let Some(&r) = dropout_rates.iter().find(|&&r| !(0.0..1.0).contains(&r)) {
            return Err(NnError::InvalidParameter(format!(
                "dropout rate {r} is outside [0, 1)"
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * scale)
                .collect();
            weights.push(Matrix::from_vec(fan_in, fan_out, data)?);
            biases.push(Matrix::zeros(1, fan_out));
        }
        Ok(FeedForwardNet {
            layer_sizes,
            weights,
            biases,
            dropout_rates,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn dropout_rates(&self) -> &[f64] {
        &self.dropout_rates
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    /// Width of the penultimate layer, which is what `extract_features` emits.
    pub fn feature_width(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 2]
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Matrix] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Matrix] {
        &mut self.biases
    }

    /// Runs the network on a batch, recording the caches `backward` needs.
    pub fn forward(&self, batch: &Matrix, mode: ForwardMode) -> Result<ForwardCache, NnError> {
        if batch.cols() != self.input_width() {
            return Err(NnError::DimensionMismatch {
                op: "forward",
                left: format!("batch width {}", batch.cols()),
                right: format!("input width {}", self.input_width()),
            });
        }
        if batch.rows() == 0 {
            return Err(NnError::EmptyInput("forward got an empty batch"));
        }

        let layer_count = self.weights.len();
        let mut activations = Vec::with_capacity(layer_count + 1);
        let mut pre_activations = Vec::with_capacity(layer_count);
        let mut dropout_masks = Vec::with_capacity(layer_count.saturating_sub(1));
        activations.push(batch.clone());

        let mut rng = match mode {
            ForwardMode::Train(rng) => Some(rng),
            ForwardMode::Eval => None,
        };

        for l in 0..layer_count {
            let mut z = activations[l].matmul(&self.weights[l])?;
            z.add_row_vector(&self.biases[l])?;
            if l + 1 < layer_count {
                let mut a = z.map(|v| if v > 0.0 { v } else { 0.0 });
                let rate = self.dropout_rates[l];
                let mask = match (&mut rng, rate > 0.0) {
                    (Some(rng), true) => {
                        let keep_scale = 1.0 / (1.0 - rate);
                        let mask = Matrix::from_vec(
                            a.rows(),
                            a.cols(),
                            (0..a.rows() * a.cols())
                                .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep_scale })
                                .collect(),
                        )?;
                        a.hadamard_assign(&mask)?;
                        Some(mask)
                    }
                    _ => None,
                };
                dropout_masks.push(mask);
                pre_activations.push(z);
                activations.push(a);
            } else {
                pre_activations.push(z);
            }
        }

        Ok(ForwardCache {
            activations,
            pre_activations,
            dropout_masks,
        })
    }

    /// Backpropagates `loss_grad_logits` (the gradient of the scalar loss with
    /// respect to the logits) through the cached forward pass, returning exact
    /// gradients for every weight and bias.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        loss_grad_logits: &Matrix,
    ) -> Result<Gradients, NnError> {
        let layer_count = self.weights.len();
        if cache.pre_activations.len() != layer_count
            || cache.activations.len() != layer_count
            || cache.dropout_masks.len() != layer_count - 1
        {
            return Err(NnError::InvalidParameter(
                "forward cache does not match network depth".to_string(),
            ));
        }
        let logits = cache.logits();
        if loss_grad_logits.rows() != logits.rows() || loss_grad_logits.cols() != logits.cols() {
            return Err(NnError::DimensionMismatch {
                op: "backward",
                left: format!("{}x{}", loss_grad_logits.rows(), loss_grad_logits.cols()),
                right: format!("{}x{}", logits.rows(), logits.cols()),
            });
        }

        let mut weight_grads = vec![Matrix::zeros(0, 0); layer_count];
        let mut bias_grads = vec![Matrix::zeros(0, 0); layer_count];
        let mut delta = loss_grad_logits.clone();

        for l in (0..layer_count).rev() {
            weight_grads[l] = cache.activations[l].matmul_transpose_lhs(&delta)?;
            bias_grads[l] = delta.column_sums();
            if l > 0 {
                let mut next = delta.matmul_transpose_rhs(&self.weights[l])?;
                if let Some(mask) = &cache.dropout_masks[l - 1] {
                    next.hadamard_assign(mask)?;
                }
                let gate = cache.pre_activations[l - 1].map(|z| if z > 0.0 { 1.0 } else { 0.0 });
                next.hadamard_assign(&gate)?;
                delta = next;
            }
        }

        Ok(Gradients {
            weights: weight_grads,
            biases: bias_grads,
        })
    }

    /// Evaluation-mode logits for an input of any row count, computed in
    /// fixed-size chunks.
    pub fn logits_eval(&self, inputs: &Matrix) -> Result<Matrix, NnError> {
        let mut out = Matrix::zeros(inputs.rows(), self.class_count());
        let mut row = 0;
        while row < inputs.rows() {
            let end = (row + EVAL_CHUNK).min(inputs.rows());
            let chunk = inputs.select_rows(&(row..end).collect::<Vec<_>>())?;
            let cache = self.forward(&chunk, ForwardMode::Eval)?;
            let logits = cache.logits();
            for r in 0..logits.rows() {
                out.row_mut(row + r).copy_from_slice(logits.row(r));
            }
            row = end;
        }
        Ok(out)
    }

    /// Evaluation-mode class probabilities at the given softmax temperature.
    pub fn predict_proba(&self, inputs: &Matrix, temperature: f64) -> Result<Matrix, NnError> {
        crate::loss::softmax_temperature(&self.logits_eval(inputs)?, temperature)
    }

    /// Evaluation-mode penultimate-layer activations, one row per input row.
    ///
    /// For a network without hidden layers this is the input itself.
    pub fn extract_features(&self, inputs: &Matrix) -> Result<Matrix, NnError> {
        if self.weights.len() == 1 {
            return inputs.select_rows(&(0..inputs.rows()).collect::<Vec<_>>());
        }
        let mut out = Matrix::zeros(inputs.rows(), self.feature_width());
        let mut row = 0;
        while row < inputs.rows() {
            let end = (row + EVAL_CHUNK).min(inputs.rows());
            let chunk = inputs.select_rows(&(row..end).collect::<Vec<_>>())?;
            let cache = self.forward(&chunk, ForwardMode::Eval)?;
            let feats = cache
                .activations
                .last()
                .expect("multi-layer cache has hidden activations");
            for r in 0..feats.rows() {
                out.row_mut(row + r).copy_from_slice(feats.row(r));
            }
            row = end;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_shapes_match_architecture() {
        let net = FeedForwardNet::init(vec![4, 3, 2], vec![0.0], 7).unwrap();
        assert_eq!(net.weights()[0].rows(), 4);
        assert_eq!(net.weights()[0].cols(), 3);
        assert_eq!(net.weights()[1].rows(), 3);
        assert_eq!(net.weights()[1].cols(), 2);
        assert_eq!(net.biases()[0].cols(), 3);
        assert_eq!(net.biases()[1].cols(), 2);
        assert_eq!(net.feature_width(), 3);
        assert_eq!(net.class_count(), 2);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = FeedForwardNet::init(vec![5, 4, 3], vec![0.2], 42).unwrap();
        let b = FeedForwardNet::init(vec![5, 4, 3], vec![0.2], 42).unwrap();
        let c = FeedForwardNet::init(vec![5, 4, 3], vec![0.2], 43).unwrap();
        assert_eq!(a.weights()[0].data(), b.weights()[0].data());
        assert_eq!(a.weights()[1].data(), b.weights()[1].data());
        assert_ne!(a.weights()[0].data(), c.weights()[0].data());
    }

    #[test]
    fn init_bounds_follow_fan_in() {
        let net = FeedForwardNet::init(vec![100, 50, 10], vec![0.0], 3).unwrap();
        let scale = 1.0 / (100f64).sqrt();
        assert!(net.weights()[0].data().iter().all(|w| w.abs() <= scale));
        assert!(net.biases()[0].data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn init_rejects_bad_configurations() {
        assert!(matches!(
            FeedForwardNet::init(vec![4], vec![], 0),
            Err(NnError::TooFewLayers(1))
        ));
        assert!(matches!(
            FeedForwardNet::init(vec![4, 3, 2], vec![], 0),
            Err(NnError::DropoutArity { expected: 1, got: 0 })
        ));
        assert!(FeedForwardNet::init(vec![4, 3, 2], vec![1.0], 0).is_err());
    }

    #[test]
    fn zero_weight_network_emits_zero_logits() {
        let mut net = FeedForwardNet::init(vec![3, 2], vec![], 0).unwrap();
        net.weights_mut()[0] = Matrix::zeros(3, 2);
        let x = Matrix::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.0, 4.0, -1.0]).unwrap();
        let cache = net.forward(&x, ForwardMode::Eval).unwrap();
        assert!(cache.logits().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_matches_hand_computation() {
        // One input, one hidden unit, one output: relu(x*2 + 1) * 3 - 0.5.
        let mut net = FeedForwardNet::init(vec![1, 1, 1], vec![0.0], 0).unwrap();
        net.weights_mut()[0] = Matrix::from_vec(1, 1, vec![2.0]).unwrap();
        net.biases_mut()[0] = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        net.weights_mut()[1] = Matrix::from_vec(1, 1, vec![3.0]).unwrap();
        net.biases_mut()[1] = Matrix::from_vec(1, 1, vec![-0.5]).unwrap();

        let x = Matrix::from_vec(2, 1, vec![1.5, -2.0]).unwrap();
        let cache = net.forward(&x, ForwardMode::Eval).unwrap();
        assert!((cache.logits().get(0, 0) - 11.5).abs() < 1e-12);
        assert!((cache.logits().get(1, 0) - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn train_mode_without_dropout_matches_eval_bitwise() {
        let net = FeedForwardNet::init(vec![6, 5, 4, 3], vec![0.0, 0.0], 11).unwrap();
        let data: Vec<f64> = (0..12).map(|i| (i as f64 - 5.0) / 4.0).collect();
        let x = Matrix::from_vec(2, 6, data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let train = net.forward(&x, ForwardMode::Train(&mut rng)).unwrap();
        let eval = net.forward(&x, ForwardMode::Eval).unwrap();
        assert_eq!(train.logits().data(), eval.logits().data());
    }

    #[test]
    fn dropout_zeroes_units_and_scales_survivors() {
        let mut net = FeedForwardNet::init(vec![1, 1000, 2], vec![0.5], 1).unwrap();
        net.weights_mut()[0] = Matrix::from_vec(1, 1000, vec![1.0; 1000]).unwrap();
        let x = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cache = net.forward(&x, ForwardMode::Train(&mut rng)).unwrap();
        let hidden = &cache.activations[1];
        let zeros = hidden.data().iter().filter(|&&v| v == 0.0).count();
        let scaled = hidden.data().iter().filter(|&&v| v == 2.0).count();
        assert_eq!(zeros + scaled, 1000);
        assert!(zeros > 400 && zeros < 600);
    }

    #[test]
    fn eval_chunking_is_seamless() {
        let net = FeedForwardNet::init(vec![3, 4, 2], vec![0.0], 21).unwrap();
        let n = EVAL_CHUNK + 37;
        let data: Vec<f64> = (0..n * 3).map(|i| ((i % 17) as f64) / 17.0).collect();
        let x = Matrix::from_vec(n, 3, data).unwrap();
        let chunked = net.logits_eval(&x).unwrap();
        let direct = net.forward(&x, ForwardMode::Eval).unwrap();
        assert_eq!(chunked.data(), direct.logits().data());
    }

    #[test]
    fn predict_proba_rows_sum_to_one_and_zero_net_is_uniform() {
        let mut net = FeedForwardNet::init(vec![3, 4], vec![], 2).unwrap();
        net.weights_mut()[0] = Matrix::zeros(3, 4);
        let x = Matrix::from_vec(2, 3, vec![0.3, 0.1, 0.9, 0.0, 0.2, 0.4]).unwrap();
        let p = net.predict_proba(&x, 1.0).unwrap();
        for r in 0..p.rows() {
            let sum: f64 = p.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(p.row(r).iter().all(|&v| (v - 0.25).abs() < 1e-12));
        }
    }

    #[test]
    fn extract_features_matches_hand_computation() {
        let mut net = FeedForwardNet::init(vec![2, 2, 1], vec![0.0], 0).unwrap();
        net.weights_mut()[0] = Matrix::from_vec(2, 2, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        net.biases_mut()[0] = Matrix::from_vec(1, 2, vec![0.0, 0.25]).unwrap();
        let x = Matrix::from_vec(1, 2, vec![2.0, 1.0]).unwrap();
        let f = net.extract_features(&x).unwrap();
        // relu([2*1 + 1*0.5, 2*-1 + 1*2 + 0.25]) = [2.5, 0.25]
        assert!((f.get(0, 0) - 2.5).abs() < 1e-12);
        assert!((f.get(0, 1) - 0.25).abs() < 1e-12);
        assert_eq!(f.cols(), net.feature_width());
    }

    #[test]
    fn backward_zero_upstream_gives_zero_gradients() {
        let net = FeedForwardNet::init(vec![4, 3, 2], vec![0.0], 5).unwrap();
        let x = Matrix::from_vec(3, 4, vec![0.1; 12]).unwrap();
        let cache = net.forward(&x, ForwardMode::Eval).unwrap();
        let grads = net.backward(&cache, &Matrix::zeros(3, 2)).unwrap();
        for g in grads.weights.iter().chain(&grads.biases) {
            assert!(g.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_mean_reduction_is_invariant_to_duplicated_rows() {
        let net = FeedForwardNet::init(vec![3, 4, 2], vec![0.0], 9).unwrap();
        let single = Matrix::from_vec(1, 3, vec![0.4, -0.2, 0.7]).unwrap();
        let doubled = Matrix::from_vec(2, 3, vec![0.4, -0.2, 0.7, 0.4, -0.2, 0.7]).unwrap();

        let labels_single = [1usize];
        let labels_doubled = [1usize, 1];

        let cache1 = net.forward(&single, ForwardMode::Eval).unwrap();
        let g1 = crate::loss::softmax_ce_grad(
            cache1.logits(),
            &crate::loss::one_hot(&labels_single, 2).unwrap(),
            1.0,
        )
        .unwrap();
        let grads1 = net.backward(&cache1, &g1).unwrap();

        let cache2 = net.forward(&doubled, ForwardMode::Eval).unwrap();
        let g2 = crate::loss::softmax_ce_grad(
            cache2.logits(),
            &crate::loss::one_hot(&labels_doubled, 2).unwrap(),
            1.0,
        )
        .unwrap();
        let grads2 = net.backward(&cache2, &g2).unwrap();

        for (a, b) in grads1.weights.iter().zip(&grads2.weights) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }
}
