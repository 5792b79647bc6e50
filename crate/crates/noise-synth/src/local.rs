//! Locally concentrated noise: clusters of feature-space neighbours flip to
//! a shared wrong class.

use nn_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{check_ratio, NoiseError};

fn squared_distance(features: &Matrix, a: usize, b: usize) -> f64 {
    features
        .row(a)
        .iter()
        .zip(features.row(b))
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Flips exactly `ceil(ratio * n)` labels in feature-space clusters.
///
/// Repeatedly picks a random not-yet-flipped seed instance, gathers its `k`
/// nearest not-yet-flipped neighbours by Euclidean distance (ties broken by
/// lower index), and flips the cluster to one random class different from
/// the seed's label, walking it nearest first. A member whose label already
/// equals the cluster's target class is skipped and stays eligible for later
/// clusters, so every counted flip is a real label change. The final cluster
/// is truncated once the exact flip budget is reached.
pub fn locally_concentrated(
    features: &Matrix,
    labels: &[usize],
    ratio: f64,
    k: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<bool>), NoiseError> {
    check_ratio(ratio)?;
    if ratio >= 1.0 {
        return Err(NoiseError::RatioOutOfRange(ratio));
    }
    if labels.is_empty() {
        return Err(NoiseError::EmptyInput("locally concentrated noise needs labels"));
    }
    if features.rows() != labels.len() {
        return Err(NoiseError::DimensionMismatch(format!(
            "{} feature rows vs {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if k == 0 {
        return Err(NoiseError::InvalidParameter("neighbourhood size k must be positive".into()));
    }
    if k >= labels.len() {
        return Err(NoiseError::InvalidParameter(format!(
            "neighbourhood size k = {k} must be smaller than the instance count {}",
            labels.len()
        )));
    }

    let n = labels.len();
    let class_count = labels.iter().max().copied().unwrap_or(0) + 1;
    let target_flips = (ratio * n as f64).ceil() as usize;
    let mut corrupted = labels.to_vec();
    let mut flipped = vec![false; n];
    if target_flips == 0 {
        return Ok((corrupted, flipped));
    }
    if class_count < 2 {
        return Err(NoiseError::TooFewClasses { minimum: 2, got: class_count });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flip_count = 0usize;
    while flip_count < target_flips {
        let unflipped: Vec<usize> = (0..n).filter(|&i| !flipped[i]).collect();
        let seed_instance = unflipped[rng.gen_range(0..unflipped.len())];

        let mut target_class = rng.gen_range(0..class_count - 1);
        if target_class >= labels[seed_instance] {
            target_class += 1;
        }

        let mut neighbours: Vec<(f64, usize)> = unflipped
            .iter()
            .copied()
            .filter(|&i| i != seed_instance)
            .map(|i| (squared_distance(features, seed_instance, i), i))
            .collect();
        neighbours.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

        let cluster = std::iter::once(seed_instance).chain(
            neighbours.iter().take(k).map(|&(_, i)| i),
        );
        for instance in cluster {
            if flip_count == target_flips {
                break;
            }
            if corrupted[instance] == target_class {
                continue;
            }
            corrupted[instance] = target_class;
            flipped[instance] = true;
            flip_count += 1;
        }
    }
    Ok((corrupted, flipped))
}
