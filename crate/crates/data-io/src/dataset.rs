//! In-memory dataset representation, checksums, stratified splitting and
//! stratified subsampling.

use nn_core::Matrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::DataError;

/// Row indices of the named splits. Unassigned rows belong to no split.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// All assigned indices, used to find the unassigned remainder.
    fn assigned(&self) -> Vec<usize> {
        let mut all: Vec<usize> =
            [&self.train, &self.val, &self.test].iter().flat_map(|v| v.iter().copied()).collect();
        all.sort_unstable();
        all
    }
}

/// Feature matrix plus integer labels and named splits.
///
/// Splits hold disjoint row indices. Labels always lie in
/// `[0, class_count)`; loaders additionally guarantee features in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub splits: Splits,
}

impl Dataset {
    /// Builds a dataset with no split assignments, validating label range.
    pub fn new(features: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self, DataError> {
        if features.rows() == 0 {
            return Err(DataError::EmptyDataset);
        }
        if features.rows() != labels.len() {
            return Err(DataError::InvalidParameter(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if class_count == 0 {
            return Err(DataError::InvalidParameter("class count must be positive".into()));
        }
        for (row, &label) in labels.iter().enumerate() {
            if label >= class_count {
                return Err(DataError::LabelRange { row, label, class_count });
            }
        }
        Ok(Dataset {
            features,
            labels,
            class_count,
            splits: Splits::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Content checksum over features, labels and class count.
    ///
    /// Split assignments deliberately do not contribute: subsampling or
    /// re-splitting the same underlying data keeps the checksum stable.
    pub fn checksum(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update((self.features.rows() as u64).to_le_bytes());
        hasher.update((self.features.cols() as u64).to_le_bytes());
        for &v in self.features.data() {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher.update((self.class_count as u64).to_le_bytes());
        for &l in &self.labels {
            hasher.update((l as u64).to_le_bytes());
        }
        let digest = hasher.finalize();
        u64::from_be_bytes(digest[..8].try_into().expect("sha256 digest is long enough"))
    }

    /// Appends another dataset's rows and marks them as the test split.
    ///
    /// This is how a pre-defined holdout pair (for example the classic
    /// `t10k` files) joins a training dataset: the combined dataset has the
    /// holdout rows assigned to `test` and everything else unassigned.
    pub fn with_holdout_test(self, holdout: Dataset) -> Result<Dataset, DataError> {
        if self.features.cols() != holdout.features.cols() {
            return Err(DataError::InvalidParameter(format!(
                "feature width mismatch: {} vs {}",
                self.features.cols(),
                holdout.features.cols()
            )));
        }
        let base_rows = self.len();
        let mut data = self.features.data().to_vec();
        data.extend_from_slice(holdout.features.data());
        let features = Matrix::from_vec(base_rows + holdout.len(), self.features.cols(), data)?;
        let mut labels = self.labels;
        labels.extend_from_slice(&holdout.labels);
        let class_count = self.class_count.max(holdout.class_count);
        let mut merged = Dataset::new(features, labels, class_count)?;
        merged.splits.test = (base_rows..base_rows + holdout.len()).collect();
        Ok(merged)
    }

    /// Labels of a split, in split index order.
    pub fn split_labels(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&r| self.labels[r]).collect()
    }
}

/// Checksum rendered as fixed-width lowercase hex.
pub fn checksum_hex(dataset: &Dataset) -> String {
    format!("{:016x}", dataset.checksum())
}

/// Target fractions for stratified splitting. Fractions must be non-negative
/// and sum to at most 1; the remainder stays unassigned.
#[derive(Debug, Clone, Copy)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn validate(&self) -> Result<(), DataError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(DataError::SplitFractions(format!(
                "fractions must be non-negative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if sum > 1.0 + 1e-9 {
            return Err(DataError::SplitFractions(format!("fractions sum to {sum} > 1")));
        }
        Ok(())
    }
}

/// Allocates `total` seats among parts sized by `weights` using the largest
/// remainder method; ties go to the lower index.
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let weight_sum: f64 = weights.iter().sum();
    if weight_sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / weight_sum * total as f64).collect();
    let mut seats: Vec<usize> = exact.iter().map(|&e| (e + 1e-9).floor() as usize).collect();
    let assigned: usize = seats.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        seats[i] += 1;
    }
    seats
}

/// Stratified split of the not-yet-assigned rows into train/val/test.
///
/// Rows already assigned to a split (for example a pre-defined test holdout)
/// are left untouched and excluded from the pool. Within each class the pool
/// is shuffled with the given seed, then split counts follow the fractions
/// with largest-remainder rounding, so per-class proportions match the
/// fractions within one row. Returned index lists are sorted ascending.
pub fn split(dataset: &Dataset, fractions: &SplitFractions, seed: u64) -> Result<Splits, DataError> {
    fractions.validate()?;
    let assigned = dataset.splits.assigned();
    let pool: Vec<usize> =
        (0..dataset.len()).filter(|i| assigned.binary_search(i).is_err()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut result = dataset.splits.clone();
    for class in 0..dataset.class_count {
        let mut members: Vec<usize> =
            pool.iter().copied().filter(|&i| dataset.labels[i] == class).collect();
        members.shuffle(&mut rng);

        let fraction_sum = fractions.train + fractions.val + fractions.test;
        let take = ((members.len() as f64 * fraction_sum) + 1e-9).floor() as usize;
        let counts = largest_remainder(&[fractions.train, fractions.val, fractions.test], take);

        let mut cursor = 0usize;
        for (list, count) in [
            (&mut result.train, counts[0]),
            (&mut result.val, counts[1]),
            (&mut result.test, counts[2]),
        ] {
            list.extend_from_slice(&members[cursor..cursor + count]);
            cursor += count;
        }
    }
    result.train.sort_unstable();
    result.val.sort_unstable();
    result.test.sort_unstable();
    Ok(result)
}

/// Stratified subsample of the train split; val and test stay untouched.
///
/// The subsample keeps `round(fraction * train_len)` rows overall, allocated
/// across classes proportionally to their train counts (largest remainder,
/// so each class is within one row of exact proportionality). With `strict`
/// set, a class that would lose all its rows is an error.
pub fn subsample(
    mut dataset: Dataset,
    fraction: f64,
    seed: u64,
    strict: bool,
) -> Result<Dataset, DataError> {
    if !(fraction.is_finite() && (0.0..=1.0).contains(&fraction)) {
        return Err(DataError::InvalidParameter(format!(
            "subsample fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let train = std::mem::take(&mut dataset.splits.train);
    if (fraction - 1.0).abs() < 1e-12 {
        dataset.splits.train = train;
        return Ok(dataset);
    }

    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.class_count];
    for &row in &train {
        per_class[dataset.labels[row]].push(row);
    }
    let weights: Vec<f64> = per_class.iter().map(|m| m.len() as f64).collect();
    let target = (fraction * train.len() as f64).round() as usize;
    let counts = largest_remainder(&weights, target);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::with_capacity(target);
    for (class, mut members) in per_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if counts[class] == 0 && strict {
            return Err(DataError::EmptyClass { fraction, class });
        }
        members.shuffle(&mut rng);
        kept.extend_from_slice(&members[..counts[class].min(members.len())]);
    }
    kept.sort_unstable();
    dataset.splits.train = kept;
    Ok(dataset)
}
