//! Row-stochastic transition matrices and label resampling.

use nn_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{check_ratio, NoiseError};

const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Square row-stochastic matrix: entry `(i, j)` is the probability that a
/// clean label `i` is observed as `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    size: usize,
    /// Row-major probabilities, `size * size` of them.
    rows: Vec<f64>,
}

impl TransitionMatrix {
    /// Validates and wraps row-major probabilities.
    pub fn new(size: usize, rows: Vec<f64>) -> Result<Self, NoiseError> {
        if size == 0 {
            return Err(NoiseError::TooFewClasses { minimum: 1, got: 0 });
        }
        if rows.len() != size * size {
            return Err(NoiseError::DimensionMismatch(format!(
                "{} entries do not fill a {size}x{size} matrix",
                rows.len()
            )));
        }
        let matrix = TransitionMatrix { size, rows };
        matrix.validate()?;
        Ok(matrix)
    }

    /// Checks entry ranges and row sums; deserialized matrices should be
    /// revalidated before use.
    pub fn validate(&self) -> Result<(), NoiseError> {
        for row in 0..self.size {
            let mut sum = 0.0;
            for col in 0..self.size {
                let value = self.get(row, col);
                if !(value.is_finite() && (-ROW_SUM_TOLERANCE..=1.0 + ROW_SUM_TOLERANCE).contains(&value)) {
                    return Err(NoiseError::EntryOutOfRange { row, col, value });
                }
                sum += value;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(NoiseError::NotRowStochastic { row, sum });
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.rows[row * self.size + col]
    }

    /// Probability mass off the diagonal of a row, i.e. the flip probability
    /// for that class.
    pub fn off_diagonal_mass(&self, row: usize) -> f64 {
        1.0 - self.get(row, row)
    }
}

/// Symmetric noise: diagonal `1 - ratio`, every off-diagonal entry
/// `ratio / (class_count - 1)`.
pub fn uniform_matrix(class_count: usize, ratio: f64) -> Result<TransitionMatrix, NoiseError> {
    if class_count < 2 {
        return Err(NoiseError::TooFewClasses { minimum: 2, got: class_count });
    }
    check_ratio(ratio)?;
    let off = ratio / (class_count - 1) as f64;
    let mut rows = vec![off; class_count * class_count];
    for i in 0..class_count {
        rows[i * class_count + i] = 1.0 - ratio;
    }
    TransitionMatrix::new(class_count, rows)
}

/// Counts how often each true class was predicted as each class. Rows are
/// true classes, columns predictions.
pub fn confusion_matrix(
    predictions: &[usize],
    truths: &[usize],
    class_count: usize,
) -> Result<Matrix, NoiseError> {
    if predictions.is_empty() {
        return Err(NoiseError::EmptyInput("confusion matrix needs predictions"));
    }
    if predictions.len() != truths.len() {
        return Err(NoiseError::DimensionMismatch(format!(
            "{} predictions vs {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let mut counts = Matrix::zeros(class_count, class_count);
    for (position, (&pred, &truth)) in predictions.iter().zip(truths).enumerate() {
        for label in [pred, truth] {
            if label >= class_count {
                return Err(NoiseError::LabelRange { position, label, class_count });
            }
        }
        counts.set(truth, pred, counts.get(truth, pred) + 1.0);
    }
    Ok(counts)
}

/// Class-dependent noise: each class keeps its label with probability
/// `1 - ratio` and distributes the flip mass over other classes
/// proportionally to the confusion counts. A row with no off-diagonal
/// confusion falls back to the uniform rule.
pub fn class_dependent_matrix(
    confusion: &Matrix,
    ratio: f64,
) -> Result<TransitionMatrix, NoiseError> {
    let class_count = confusion.rows();
    if class_count < 2 {
        return Err(NoiseError::TooFewClasses { minimum: 2, got: class_count });
    }
    if confusion.cols() != class_count {
        return Err(NoiseError::DimensionMismatch(format!(
            "confusion matrix is {}x{}, expected square",
            confusion.rows(),
            confusion.cols()
        )));
    }
    check_ratio(ratio)?;

    let uniform_off = ratio / (class_count - 1) as f64;
    let mut rows = vec![0.0; class_count * class_count];
    for i in 0..class_count {
        let off_total: f64 = (0..class_count)
            .filter(|&j| j != i)
            .map(|j| confusion.get(i, j))
            .sum();
        for j in 0..class_count {
            rows[i * class_count + j] = if j == i {
                1.0 - ratio
            } else if off_total > 0.0 {
                ratio * confusion.get(i, j) / off_total
            } else {
                uniform_off
            };
        }
    }
    TransitionMatrix::new(class_count, rows)
}

/// Resamples every label independently from its transition row.
///
/// Returns the corrupted labels and a mask marking positions whose label
/// changed. The same seed always yields the same draw.
pub fn apply_transition(
    labels: &[usize],
    matrix: &TransitionMatrix,
    seed: u64,
) -> Result<(Vec<usize>, Vec<bool>), NoiseError> {
    matrix.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corrupted = Vec::with_capacity(labels.len());
    let mut flipped = Vec::with_capacity(labels.len());
    for (position, &label) in labels.iter().enumerate() {
        if label >= matrix.size() {
            return Err(NoiseError::LabelRange {
                position,
                label,
                class_count: matrix.size(),
            });
        }
        let draw: f64 = rng.gen();
        let mut cumulative = 0.0;
        let mut new_label = matrix.size() - 1;
        for j in 0..matrix.size() {
            cumulative += matrix.get(label, j);
            if draw < cumulative {
                new_label = j;
                break;
            }
        }
        corrupted.push(new_label);
        flipped.push(new_label != label);
    }
    Ok((corrupted, flipped))
}
