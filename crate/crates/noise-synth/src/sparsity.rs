//! Per-class feature sparsity: the mean over classes of the trace of the
//! class-conditional covariance.

use nn_core::Matrix;
use serde::Serialize;

use crate::NoiseError;

/// The variance convention behind every report, recorded so results using a
/// different convention are never silently compared.
pub const VARIANCE_CONVENTION: &str = "population-covariance-trace";

/// Sparsity summary over a feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityReport {
    /// Mean of `per_class_variance`.
    pub sigma: f64,
    /// Trace of the population covariance of each class's feature rows.
    pub per_class_variance: Vec<f64>,
    pub class_count: usize,
    pub feature_width: usize,
    pub rows: usize,
    /// Always [`VARIANCE_CONVENTION`].
    pub convention: &'static str,
}

/// Computes the sparsity measure over class-grouped feature rows.
///
/// For each class the value is the sum over feature dimensions of the
/// population variance (division by the class count, not `n - 1`); sigma is
/// the mean of the class values. Every class must have at least one row.
pub fn sparsity_sigma(
    features: &Matrix,
    labels: &[usize],
    class_count: usize,
) -> Result<SparsityReport, NoiseError> {
    if labels.is_empty() {
        return Err(NoiseError::EmptyInput("sparsity needs labeled rows"));
    }
    if features.rows() != labels.len() {
        return Err(NoiseError::DimensionMismatch(format!(
            "{} feature rows vs {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if class_count == 0 {
        return Err(NoiseError::TooFewClasses { minimum: 1, got: 0 });
    }

    let width = features.cols();
    let mut counts = vec![0usize; class_count];
    let mut sums = vec![0.0f64; class_count * width];
    for (row, &label) in labels.iter().enumerate() {
        if label >= class_count {
            return Err(NoiseError::LabelRange { position: row, label, class_count });
        }
        counts[label] += 1;
        for (d, &v) in features.row(row).iter().enumerate() {
            sums[label * width + d] += v;
        }
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(NoiseError::InvalidParameter(format!(
            "class {class} has no instances"
        )));
    }

    let mut squared_dev = vec![0.0f64; class_count * width];
    for (row, &label) in labels.iter().enumerate() {
        let count = counts[label] as f64;
        for (d, &v) in features.row(row).iter().enumerate() {
            let mean = sums[label * width + d] / count;
            let dev = v - mean;
            squared_dev[label * width + d] += dev * dev;
        }
    }

    let per_class: Vec<f64> = (0..class_count)
        .map(|c| {
            let count = counts[c] as f64;
            (0..width).map(|d| squared_dev[c * width + d] / count).sum()
        })
        .collect();
    let sigma = per_class.iter().sum::<f64>() / class_count as f64;
    Ok(SparsityReport {
        sigma,
        per_class_variance: per_class,
        class_count,
        feature_width: width,
        rows: labels.len(),
        convention: VARIANCE_CONVENTION,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_instances_have_zero_sigma() {
        let features = Matrix::from_rows(&[
            vec![0.3, 0.7],
            vec![0.3, 0.7],
            vec![0.9, 0.1],
            vec![0.9, 0.1],
        ])
        .unwrap();
        let report = sparsity_sigma(&features, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(report.sigma, 0.0);
        assert_eq!(report.per_class_variance, vec![0.0, 0.0]);
    }

    #[test]
    fn hand_computed_two_point_class() {
        // Class 0 rows: (0, 0) and (2, 2). Mean (1, 1); population variance
        // per dimension is 1, so the trace is 2.
        let features = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0], vec![5.0, 5.0]]).unwrap();
        let report = sparsity_sigma(&features, &[0, 0, 1], 2).unwrap();
        assert_eq!(report.per_class_variance[0], 2.0);
        assert_eq!(report.per_class_variance[1], 0.0);
        assert_eq!(report.sigma, 1.0);
    }

    #[test]
    fn sigma_is_mean_of_per_class_traces() {
        let features = Matrix::from_rows(&[
            vec![0.0],
            vec![4.0],
            vec![1.0],
            vec![1.0],
            vec![3.0],
            vec![7.0],
        ])
        .unwrap();
        let report = sparsity_sigma(&features, &[0, 0, 1, 1, 2, 2], 3).unwrap();
        assert_eq!(report.per_class_variance, vec![4.0, 0.0, 4.0]);
        assert!((report.sigma - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn permutation_of_rows_leaves_sigma_unchanged() {
        let features = Matrix::from_rows(&[
            vec![0.1, 0.9],
            vec![0.4, 0.2],
            vec![0.8, 0.5],
            vec![0.3, 0.3],
        ])
        .unwrap();
        let labels = [0usize, 1, 0, 1];
        let report = sparsity_sigma(&features, &labels, 2).unwrap();

        let perm = [2usize, 0, 3, 1];
        let permuted = features.select_rows(&perm).unwrap();
        let permuted_labels: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
        let report_permuted = sparsity_sigma(&permuted, &permuted_labels, 2).unwrap();
        assert!((report.sigma - report_permuted.sigma).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_classes_and_bad_shapes() {
        let features = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(
            sparsity_sigma(&features, &[0, 0], 2),
            Err(NoiseError::InvalidParameter(_))
        ));
        assert!(sparsity_sigma(&features, &[0], 1).is_err());
        assert!(sparsity_sigma(&features, &[0, 2], 2).is_err());
    }
}
