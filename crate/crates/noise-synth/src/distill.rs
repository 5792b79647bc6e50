//! Feature-dependent corruption through knowledge distillation.
//!
//! A teacher network trains on the clean train split, its tempered softmax
//! over the train split becomes the soft targets for a student of the same
//! shape, and the student's confidences then decide which train and val
//! instances flip. Instances the student confidently places in some other
//! class are exactly the ones near decision boundaries, which is what makes
//! this noise family feature-dependent.

use std::collections::BTreeMap;

use data_io::{Dataset, NoisyLabelSet, SplitLabels};
use nn_core::{
    train, DistillObjective, FeedForwardNet, HardLabelObjective, TrainConfig, TrainHistory,
};

use crate::{flip_by_score, sparsity_sigma, NoiseError, SparsityReport};

/// Architecture and training settings for the teacher/student pair.
#[derive(Debug, Clone)]
pub struct DistillConfig {
    /// Layer widths shared by teacher and student.
    pub layer_sizes: Vec<usize>,
    /// Dropout rates shared by teacher and student, one per hidden layer.
    pub dropout_rates: Vec<f64>,
    pub teacher: TrainConfig,
    pub student: TrainConfig,
    /// Softmax temperature for the soft targets and the student's soft term.
    pub temperature: f64,
    /// Weight of the hard-label term in the student loss.
    pub alpha: f64,
}

impl DistillConfig {
    fn architecture_string(&self) -> String {
        let widths: Vec<String> = self.layer_sizes.iter().map(|w| w.to_string()).collect();
        format!("mlp:{}", widths.join(","))
    }

    fn dropout_string(&self) -> String {
        let rates: Vec<String> = self.dropout_rates.iter().map(|r| r.to_string()).collect();
        format!("drop:{}", rates.join(","))
    }

    fn params(&self) -> BTreeMap<String, String> {
        let mut params = BTreeMap::new();
        params.insert("architecture".into(), self.architecture_string());
        params.insert("dropout".into(), self.dropout_string());
        params.insert("temperature".into(), self.temperature.to_string());
        params.insert("alpha".into(), self.alpha.to_string());
        for (prefix, cfg) in [("teacher", &self.teacher), ("student", &self.student)] {
            params.insert(format!("{prefix}_seed"), cfg.seed.to_string());
            params.insert(format!("{prefix}_epochs"), cfg.epochs.to_string());
            params.insert(format!("{prefix}_batch_size"), cfg.batch_size.to_string());
            params.insert(format!("{prefix}_base_lr"), cfg.base_lr.to_string());
            params.insert(format!("{prefix}_momentum"), cfg.momentum.to_string());
            params.insert(format!("{prefix}_halving_period"), cfg.halving_period.to_string());
        }
        params
    }
}

/// Everything the distillation pipeline produces besides the labels: the
/// student network (whose confidences decided the flips), the sparsity of
/// its penultimate features over the train split, and both training
/// histories.
pub struct DistillOutcome {
    pub labels: NoisyLabelSet,
    pub sparsity: SparsityReport,
    pub student: FeedForwardNet,
    pub teacher_history: TrainHistory,
    pub student_history: TrainHistory,
}

/// Runs the distillation pipeline and flips the most boundary-like train and
/// val instances.
///
/// Flips exactly `ceil(ratio * n)` of the `n` covered (train plus val)
/// instances. `artifact_seed` only labels the artifact; the stochastic steps
/// are governed by the teacher and student seeds recorded in the artifact
/// parameters.
pub fn distill_corrupt(
    dataset: &Dataset,
    config: &DistillConfig,
    target_ratio: f64,
    artifact_seed: u64,
) -> Result<DistillOutcome, NoiseError> {
    crate::check_ratio(target_ratio)?;
    if dataset.splits.train.is_empty() {
        return Err(NoiseError::EmptyInput("distillation needs a train split"));
    }
    if config.layer_sizes.first() != Some(&dataset.features.cols()) {
        return Err(NoiseError::InvalidParameter(format!(
            "network input width {:?} does not match feature width {}",
            config.layer_sizes.first(),
            dataset.features.cols()
        )));
    }
    if config.layer_sizes.last() != Some(&dataset.class_count) {
        return Err(NoiseError::InvalidParameter(format!(
            "network output width {:?} does not match class count {}",
            config.layer_sizes.last(),
            dataset.class_count
        )));
    }

    let mut train_rows = dataset.splits.train.clone();
    train_rows.sort_unstable();
    let mut val_rows = dataset.splits.val.clone();
    val_rows.sort_unstable();

    let x_train = dataset.features.select_rows(&train_rows)?;
    let y_train = dataset.split_labels(&train_rows);

    let mut teacher = FeedForwardNet::init(
        config.layer_sizes.clone(),
        config.dropout_rates.clone(),
        config.teacher.seed,
    )?;
    let teacher_objective = HardLabelObjective { labels: &y_train };
    let teacher_history =
        train(&mut teacher, &x_train, &teacher_objective, &y_train, None, &config.teacher)?;

    let soft_targets = teacher.predict_proba(&x_train, config.temperature)?;
    let mut student = FeedForwardNet::init(
        config.layer_sizes.clone(),
        config.dropout_rates.clone(),
        config.student.seed,
    )?;
    let student_objective = DistillObjective {
        hard_labels: &y_train,
        soft_targets: &soft_targets,
        alpha: config.alpha,
        temperature: config.temperature,
    };
    let student_history =
        train(&mut student, &x_train, &student_objective, &y_train, None, &config.student)?;

    let covered: Vec<usize> = train_rows.iter().chain(&val_rows).copied().collect();
    let x_covered = dataset.features.select_rows(&covered)?;
    let clean_labels = dataset.split_labels(&covered);
    let probabilities = student.predict_proba(&x_covered, 1.0)?;
    let plan = flip_by_score(&probabilities, &clean_labels, target_ratio)?;

    let mut corrupted = clean_labels;
    plan.apply(&mut corrupted);
    let (train_labels, val_labels) = corrupted.split_at(train_rows.len());

    let mut splits = vec![SplitLabels { name: "train", rows: &train_rows, labels: train_labels }];
    if !val_rows.is_empty() {
        splits.push(SplitLabels { name: "val", rows: &val_rows, labels: val_labels });
    }
    let artifact = NoisyLabelSet::build(
        dataset,
        "featdep",
        target_ratio,
        artifact_seed,
        config.params(),
        &splits,
    )?;

    let student_features = student.extract_features(&x_train)?;
    let sparsity = sparsity_sigma(&student_features, &y_train, dataset.class_count)?;
    Ok(DistillOutcome {
        labels: artifact,
        sparsity,
        student,
        teacher_history,
        student_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nn_core::Matrix;

    /// Two radial Gaussian-ish blobs with a known midline boundary at x = 0.5.
    fn blob_dataset(n_per_class: usize) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_per_class {
            let angle = i as f64 * 2.399963;
            let radius = 0.18 * ((i % 7) as f64 / 7.0 + 0.15);
            rows.push(vec![0.25 + radius * angle.cos(), 0.5 + radius * angle.sin()]);
            labels.push(0);
            rows.push(vec![0.75 + radius * angle.cos(), 0.5 + radius * angle.sin()]);
            labels.push(1);
        }
        let features = Matrix::from_rows(&rows).unwrap();
        let mut ds = Dataset::new(features, labels, 2).unwrap();
        let n = ds.len();
        ds.splits.train = (0..n * 3 / 4).collect();
        ds.splits.val = (n * 3 / 4..n).collect();
        ds
    }

    fn quick_config(seed: u64) -> DistillConfig {
        DistillConfig {
            layer_sizes: vec![2, 12, 2],
            dropout_rates: vec![0.0],
            teacher: TrainConfig { epochs: 30, batch_size: 16, base_lr: 0.3, momentum: 0.9, halving_period: 20, seed },
            student: TrainConfig { epochs: 30, batch_size: 16, base_lr: 0.3, momentum: 0.9, halving_period: 20, seed: seed + 1 },
            temperature: 4.0,
            alpha: 0.3,
        }
    }

    #[test]
    fn flips_exactly_ceil_ratio_n_and_marks_them() {
        let ds = blob_dataset(60);
        let covered = ds.splits.train.len() + ds.splits.val.len();
        let outcome = distill_corrupt(&ds, &quick_config(5), 0.35, 42).unwrap();
        let artifact = &outcome.labels;
        let expected = (0.35 * covered as f64).ceil() as usize;
        assert_eq!(artifact.flip_count(), expected);
        assert_eq!(artifact.labels.len(), covered);
        assert!((artifact.realized_ratio - expected as f64 / covered as f64).abs() < 1e-12);
        assert_eq!(artifact.noise_type, "featdep");
        assert_eq!(outcome.sparsity.class_count, 2);
        assert_eq!(outcome.sparsity.feature_width, 12);
        assert!(outcome.sparsity.sigma.is_finite());
        assert_eq!(outcome.teacher_history.epochs.len(), 30);
        assert_eq!(outcome.student_history.epochs.len(), 30);
    }

    #[test]
    fn flipped_labels_are_the_student_argmax_non_given() {
        let ds = blob_dataset(40);
        let outcome = distill_corrupt(&ds, &quick_config(21), 0.3, 0).unwrap();
        let covered: Vec<usize> =
            ds.splits.train.iter().chain(&ds.splits.val).copied().collect();
        let x = ds.features.select_rows(&covered).unwrap();
        let probs = outcome.student.predict_proba(&x, 1.0).unwrap();
        for (pos, &row) in covered.iter().enumerate() {
            if !outcome.labels.flipped[pos] {
                continue;
            }
            let given = ds.labels[row];
            let (mut best_class, mut best_p) = (usize::MAX, f64::NEG_INFINITY);
            for (class, &p) in probs.row(pos).iter().enumerate() {
                if class != given && p > best_p {
                    best_p = p;
                    best_class = class;
                }
            }
            assert_eq!(outcome.labels.labels[pos], best_class);
            assert_ne!(outcome.labels.labels[pos], given);
        }
    }

    #[test]
    fn flipped_instances_hug_the_class_boundary() {
        let ds = blob_dataset(80);
        let artifact = distill_corrupt(&ds, &quick_config(11), 0.2, 0).unwrap().labels;

        // The analytic boundary between the blobs is the vertical line
        // x = 0.5; compare mean distances to it.
        let overlay_rows: Vec<usize> = ds
            .splits
            .train
            .iter()
            .chain(&ds.splits.val)
            .copied()
            .collect();
        let mut flipped_dist = Vec::new();
        let mut kept_dist = Vec::new();
        for (pos, &row) in overlay_rows.iter().enumerate() {
            let d = (ds.features.get(row, 0) - 0.5).abs();
            if artifact.flipped[pos] {
                flipped_dist.push(d);
            } else {
                kept_dist.push(d);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&flipped_dist) < mean(&kept_dist),
            "flipped {} vs kept {}",
            mean(&flipped_dist),
            mean(&kept_dist)
        );
    }

    #[test]
    fn pipeline_is_deterministic_per_seeds() {
        let ds = blob_dataset(40);
        let a = distill_corrupt(&ds, &quick_config(3), 0.25, 7).unwrap().labels;
        let b = distill_corrupt(&ds, &quick_config(3), 0.25, 7).unwrap().labels;
        assert_eq!(a, b);
        assert_eq!(
            data_io::to_canonical_bytes(&a).unwrap(),
            data_io::to_canonical_bytes(&b).unwrap()
        );
        // A different network seed is recorded in the artifact even when the
        // flip set happens to agree on an easy problem.
        let c = distill_corrupt(&ds, &quick_config(4), 0.25, 7).unwrap().labels;
        assert_ne!(a.params["teacher_seed"], c.params["teacher_seed"]);
        assert_ne!(a, c);
    }

    #[test]
    fn records_regeneration_parameters() {
        let ds = blob_dataset(30);
        let config = quick_config(9);
        let artifact = distill_corrupt(&ds, &config, 0.1, 1).unwrap().labels;
        assert_eq!(artifact.params["architecture"], "mlp:2,12,2");
        assert_eq!(artifact.params["dropout"], "drop:0");
        assert_eq!(artifact.params["temperature"], "4");
        assert_eq!(artifact.params["alpha"], "0.3");
        assert_eq!(artifact.params["teacher_seed"], "9");
        assert_eq!(artifact.params["student_seed"], "10");
    }

    #[test]
    fn rejects_mismatched_architecture() {
        let ds = blob_dataset(20);
        let mut config = quick_config(0);
        config.layer_sizes = vec![3, 4, 2];
        assert!(distill_corrupt(&ds, &config, 0.1, 0).is_err());
        let mut config = quick_config(0);
        config.layer_sizes = vec![2, 4, 5];
        assert!(distill_corrupt(&ds, &config, 0.1, 0).is_err());
    }
}
