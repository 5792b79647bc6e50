//! Score-based flipping: the instances a model most confidently assigns to
//! some other class are the ones that flip.

use nn_core::Matrix;
use serde::Serialize;

use crate::{check_ratio, NoiseError};

/// Planned flips ordered most confident first: parallel lists of instance
/// positions, replacement labels, and the scores that ranked them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipPlan {
    indices: Vec<usize>,
    new_labels: Vec<usize>,
    scores: Vec<f64>,
}

impl FlipPlan {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn new_labels(&self) -> &[usize] {
        &self.new_labels
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Rewrites `labels` in place according to the plan.
    pub fn apply(&self, labels: &mut [usize]) {
        for (&position, &new_label) in self.indices.iter().zip(&self.new_labels) {
            labels[position] = new_label;
        }
    }
}

/// Selects the `ceil(ratio * n)` instances with the highest non-given-class
/// probability and flips each to its most probable other class.
///
/// The score of an instance is `max` over classes other than its given label
/// of the class probability. Selection ties break toward the lower row
/// index; new-label ties break toward the lower class index. Scores are only
/// compared, never thresholded, so any positive rescaling of a row leaves
/// the plan unchanged.
pub fn flip_by_score(
    probabilities: &Matrix,
    given_labels: &[usize],
    ratio: f64,
) -> Result<FlipPlan, NoiseError> {
    check_ratio(ratio)?;
    let n = given_labels.len();
    if n == 0 {
        return Err(NoiseError::EmptyInput("flip_by_score needs instances"));
    }
    if probabilities.rows() != n {
        return Err(NoiseError::DimensionMismatch(format!(
            "{} probability rows vs {} labels",
            probabilities.rows(),
            n
        )));
    }
    let class_count = probabilities.cols();
    if class_count < 2 {
        return Err(NoiseError::TooFewClasses { minimum: 2, got: class_count });
    }
    let flip_target = (ratio * n as f64).ceil() as usize;
    if flip_target > n {
        return Err(NoiseError::TooManyFlips { requested: flip_target, available: n });
    }

    let mut scored: Vec<(f64, usize, usize)> = Vec::with_capacity(n);
    for (position, &given) in given_labels.iter().enumerate() {
        if given >= class_count {
            return Err(NoiseError::LabelRange { position, label: given, class_count });
        }
        let row = probabilities.row(position);
        let mut best_class = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        for (class, &p) in row.iter().enumerate() {
            if class != given && p > best_score {
                best_score = p;
                best_class = class;
            }
        }
        scored.push((best_score, position, best_class));
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let selected = &scored[..flip_target];
    Ok(FlipPlan {
        indices: selected.iter().map(|&(_, position, _)| position).collect(),
        new_labels: selected.iter().map(|&(_, _, class)| class).collect(),
        scores: selected.iter().map(|&(score, _, _)| score).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(rows: &[[f64; 2]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn ratio_zero_yields_empty_plan() {
        let p = probs(&[[0.9, 0.1], [0.2, 0.8]]);
        let plan = flip_by_score(&p, &[0, 1], 0.0).unwrap();
        assert!(plan.is_empty());
    }

    #[test]
    fn selects_highest_non_given_scores() {
        // Non-given scores per row: 0.9, 0.1, 0.4, 0.7 -> rows 0 and 3 flip
        // at ratio 0.5.
        let p = probs(&[[0.1, 0.9], [0.9, 0.1], [0.6, 0.4], [0.3, 0.7]]);
        let plan = flip_by_score(&p, &[0, 0, 0, 0], 0.5).unwrap();
        assert_eq!(plan.indices(), [0, 3]);
        assert_eq!(plan.new_labels(), [1, 1]);
        assert_eq!(plan.scores(), [0.9, 0.7]);
    }

    #[test]
    fn selection_count_is_ceil() {
        let p = probs(&[[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]]);
        let plan = flip_by_score(&p, &[0, 0, 0], 0.34).unwrap();
        assert_eq!(plan.len(), 2);
    }

    #[test]
    fn equal_scores_break_toward_lower_index() {
        let p = probs(&[[0.5, 0.5], [0.5, 0.5], [0.5, 0.5], [0.5, 0.5]]);
        let plan = flip_by_score(&p, &[0, 0, 0, 0], 0.5).unwrap();
        assert_eq!(plan.indices(), [0, 1]);
    }

    #[test]
    fn new_label_is_argmax_excluding_given_with_low_class_ties() {
        let p = Matrix::from_rows(&[vec![0.4, 0.3, 0.3]]).unwrap();
        // Given class 0; classes 1 and 2 tie at 0.3, class 1 wins.
        let plan = flip_by_score(&p, &[0], 1.0).unwrap();
        assert_eq!(plan.indices(), [0]);
        assert_eq!(plan.new_labels(), [1]);

        let one_hot = Matrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        // Given class 0 again; the other classes tie at zero.
        let plan = flip_by_score(&one_hot, &[0], 1.0).unwrap();
        assert_eq!(plan.indices(), [0]);
        assert_eq!(plan.new_labels(), [1]);
    }

    #[test]
    fn plan_is_invariant_under_positive_row_rescaling() {
        let raw = Matrix::from_rows(&[
            vec![0.2, 0.5, 0.3],
            vec![0.7, 0.1, 0.2],
            vec![0.3, 0.3, 0.4],
            vec![0.25, 0.35, 0.4],
        ])
        .unwrap();
        let scaled = raw.map(|v| v * 7.5);
        let labels = [1usize, 0, 2, 1];
        let a = flip_by_score(&raw, &labels, 0.5).unwrap();
        let b = flip_by_score(&scaled, &labels, 0.5).unwrap();
        assert_eq!(a.indices(), b.indices());
        assert_eq!(a.new_labels(), b.new_labels());
    }

    #[test]
    fn apply_rewrites_selected_positions() {
        let p = probs(&[[0.1, 0.9], [0.9, 0.1]]);
        let plan = flip_by_score(&p, &[0, 1], 0.5).unwrap();
        let mut labels = vec![0, 1];
        plan.apply(&mut labels);
        assert_eq!(labels, vec![1, 1]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = probs(&[[0.5, 0.5]]);
        assert!(flip_by_score(&p, &[], 0.5).is_err());
        assert!(flip_by_score(&p, &[0, 1], 0.5).is_err());
        assert!(flip_by_score(&p, &[2], 0.5).is_err());
        assert!(flip_by_score(&p, &[0], 1.5).is_err());
        let single = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(
            flip_by_score(&single, &[0], 0.5),
            Err(NoiseError::TooFewClasses { .. })
        ));
    }
}
