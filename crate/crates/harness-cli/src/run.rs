//! The single-run pipeline: load, split, subsample, corrupt, train, evaluate.
//!
//! Corruption covers exactly the train and val splits; the test split always
//! keeps its original labels and is evaluated against them. Every stochastic
//! step derives its seed from the config: the training run and noise
//! application use `seed` itself, models trained along the way (the
//! class-dependent auxiliary net, the distillation teacher and student, the
//! co-teaching peer) use fixed offsets of it, all echoed in the report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use data_io::{load_csv, load_idx, load_noisy_labels, split, subsample, Dataset, NoisyLabelSet, SplitFractions, SplitLabels};
use nn_core::{
    evaluate_accuracy, train, FeedForwardNet, HardLabelObjective, Matrix, TrainHistory,
};
use noise_synth::{
    apply_transition, class_dependent_matrix, confusion_matrix, distill_corrupt, locally_concentrated,
    sparsity_sigma, uniform_matrix, DistillConfig, TransitionMatrix,
};
use robust_baselines::{
    co_teaching_train, BootstrapObjective, CoTeachingState, ForgetSchedule, ForwardObjective,
};
use serde::Serialize;

use crate::config::{DataFormat, ExperimentConfig, NoiseKind, RobustMethod};
use crate::{HarnessError, Stage, ToolkitError};

/// Everything a finished run reports. The echoed config plus the seed map
/// fully determine a rerun; only `wall_clock_seconds` varies between reruns.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub toolkit_version: String,
    /// Complete effective configuration, canonical key-value form.
    pub config: BTreeMap<String, String>,
    /// Every seed the run consumed, including derived ones.
    pub seeds: BTreeMap<String, u64>,
    pub noise_type: String,
    pub target_ratio: f64,
    /// Flip fraction actually realized over the covered rows.
    pub realized_ratio: f64,
    /// Sparsity of the trained net's penultimate features over the train
    /// split, grouped by clean labels; absent for architectures without a
    /// hidden layer.
    pub sigma: Option<f64>,
    /// Eval-mode accuracy on the train split against its (possibly noisy)
    /// training labels.
    pub final_train_accuracy: f64,
    /// Eval-mode accuracy on the val split against its (possibly noisy)
    /// labels; absent when the val split is empty.
    pub final_val_accuracy: Option<f64>,
    /// Eval-mode accuracy on the untouched test split, clean labels.
    pub final_test_accuracy: f64,
    pub history: TrainHistory,
    /// Second net's history for co-teaching runs.
    pub history_b: Option<TrainHistory>,
    pub wall_clock_seconds: f64,
}

/// A finished run: the report plus the trained artifacts for further
/// analysis.
pub struct RunOutput {
    pub report: RunReport,
    pub net: FeedForwardNet,
    /// Co-teaching peer, when that method ran.
    pub net_b: Option<FeedForwardNet>,
    /// The corruption artifact, when noise was injected.
    pub noisy: Option<NoisyLabelSet>,
}

/// Serializes a report as pretty JSON with a trailing newline.
pub fn report_json(report: &RunReport) -> Result<String, HarnessError> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(data_io::DataError::Json)
        .stage("report")?;
    text.push('\n');
    Ok(text)
}

/// Writes a report next to whatever the command produced.
pub fn write_report(report: &RunReport, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, report_json(report)?).map_err(ToolkitError::Io).stage("report")
}

fn idx_file(dir: &Path, name: &str) -> Result<PathBuf, HarnessError> {
    let plain = dir.join(name);
    if plain.exists() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.exists() {
        return Ok(gz);
    }
    Err(HarnessError {
        stage: "load",
        source: ToolkitError::Data(data_io::DataError::Format {
            path: dir.display().to_string(),
            detail: format!("missing {name} (or {name}.gz)"),
        }),
    })
}

/// Loads, splits and subsamples the configured dataset.
///
/// IDX datasets are a directory holding the classic four files
/// (`train-images-idx3-ubyte`, `train-labels-idx1-ubyte` and the `t10k`
/// pair, optionally gzipped); the `t10k` pair becomes the test split and the
/// train/val fractions divide the remaining rows. CSV datasets are a single
/// file split by the three configured fractions.
pub fn prepare_dataset(config: &ExperimentConfig) -> Result<Dataset, HarnessError> {
    config.validate()?;
    if config.dataset.is_empty() {
        return Err(HarnessError::config("dataset path is required".to_string()));
    }

    let mut dataset = match config.format {
        DataFormat::Idx => {
            let dir = Path::new(&config.dataset);
            let train = load_idx(
                &idx_file(dir, "train-images-idx3-ubyte")?,
                &idx_file(dir, "train-labels-idx1-ubyte")?,
            )
            .stage("load")?;
            let holdout = load_idx(
                &idx_file(dir, "t10k-images-idx3-ubyte")?,
                &idx_file(dir, "t10k-labels-idx1-ubyte")?,
            )
            .stage("load")?;
            train.with_holdout_test(holdout).stage("load")?
        }
        DataFormat::Csv => {
            load_csv(Path::new(&config.dataset), &config.label_column).stage("load")?
        }
    };

    let fractions = SplitFractions {
        train: config.train_fraction,
        val: config.val_fraction,
        test: config.test_fraction,
    };
    dataset.splits = split(&dataset, &fractions, config.split_seed).stage("split")?;

    if config.dataset_fraction < 1.0 {
        dataset = subsample(dataset, config.dataset_fraction, config.split_seed, true)
            .stage("subsample")?;
    }
    Ok(dataset)
}

/// The corruption step's products: the artifact, the transition matrix when
/// the noise family defines one, and any extra seeds consumed.
pub(crate) struct Corruption {
    pub artifact: Option<NoisyLabelSet>,
    pub true_matrix: Option<TransitionMatrix>,
    pub extra_seeds: BTreeMap<String, u64>,
}

fn covered_rows(dataset: &Dataset) -> (Vec<usize>, Vec<usize>) {
    let mut train = dataset.splits.train.clone();
    train.sort_unstable();
    let mut val = dataset.splits.val.clone();
    val.sort_unstable();
    (train, val)
}

fn build_artifact(
    dataset: &Dataset,
    noise_type: &str,
    ratio: f64,
    seed: u64,
    params: BTreeMap<String, String>,
    train_rows: &[usize],
    val_rows: &[usize],
    corrupted: &[usize],
) -> Result<NoisyLabelSet, HarnessError> {
    let (train_labels, val_labels) = corrupted.split_at(train_rows.len());
    let mut splits = vec![SplitLabels { name: "train", rows: train_rows, labels: train_labels }];
    if !val_rows.is_empty() {
        splits.push(SplitLabels { name: "val", rows: val_rows, labels: val_labels });
    }
    NoisyLabelSet::build(dataset, noise_type, ratio, seed, params, &splits).stage("corrupt")
}

/// Applies the configured noise family to the train and val splits.
pub(crate) fn corrupt_dataset(
    dataset: &Dataset,
    config: &ExperimentConfig,
) -> Result<Corruption, HarnessError> {
    let mut extra_seeds = BTreeMap::new();
    if config.noise == NoiseKind::None {
        return Ok(Corruption { artifact: None, true_matrix: None, extra_seeds });
    }

    let (train_rows, val_rows) = covered_rows(dataset);
    if train_rows.is_empty() {
        return Err(HarnessError::config("corruption needs a non-empty train split".to_string()));
    }
    let covered: Vec<usize> = train_rows.iter().chain(&val_rows).copied().collect();
    let clean: Vec<usize> = dataset.split_labels(&covered);
    let noise_seed = config.seed;

    let corruption = match config.noise {
        NoiseKind::None => unreachable!("handled above"),
        NoiseKind::Uniform => {
            let matrix = uniform_matrix(dataset.class_count, config.ratio).stage("corrupt")?;
            let (corrupted, _) = apply_transition(&clean, &matrix, noise_seed).stage("corrupt")?;
            let artifact = build_artifact(
                dataset,
                "uniform",
                config.ratio,
                noise_seed,
                BTreeMap::new(),
                &train_rows,
                &val_rows,
                &corrupted,
            )?;
            Corruption { artifact: Some(artifact), true_matrix: Some(matrix), extra_seeds }
        }
        NoiseKind::ClassDependent => {
            if dataset.splits.test.is_empty() {
                return Err(HarnessError::config(
                    "class-dependent noise derives its confusion matrix from the test split, which is empty"
                        .to_string(),
                ));
            }
            let aux_seed = config.seed + 1;
            extra_seeds.insert("aux_seed".into(), aux_seed);
            let sizes = config.layer_sizes()?;
            let drops = config.dropout_rates(&sizes)?;
            check_dimensions(&sizes, dataset)?;
            let mut aux = FeedForwardNet::init(sizes, drops, aux_seed).stage("corrupt")?;
            let x_train = dataset.features.select_rows(&train_rows).stage("corrupt")?;
            let y_train = dataset.split_labels(&train_rows);
            let mut aux_config = config.train_config();
            aux_config.seed = aux_seed;
            train(&mut aux, &x_train, &HardLabelObjective { labels: &y_train }, &y_train, None, &aux_config)
                .stage("corrupt")?;

            let x_test = dataset.features.select_rows(&dataset.splits.test).stage("corrupt")?;
            let y_test = dataset.split_labels(&dataset.splits.test);
            let predictions = aux.logits_eval(&x_test).stage("corrupt")?.argmax_rows();
            let confusion =
                confusion_matrix(&predictions, &y_test, dataset.class_count).stage("corrupt")?;
            let matrix = class_dependent_matrix(&confusion, config.ratio).stage("corrupt")?;

            let (corrupted, _) = apply_transition(&clean, &matrix, noise_seed).stage("corrupt")?;
            let mut params = BTreeMap::new();
            params.insert("aux_seed".into(), aux_seed.to_string());
            params.insert("aux_epochs".into(), config.epochs.to_string());
            params.insert("architecture".into(), config.arch.clone());
            params.insert("dropout".into(), config.drop.clone());
            params.insert(
                "matrix".into(),
                serde_json::to_string(&matrix).map_err(data_io::DataError::Json).stage("corrupt")?,
            );
            let artifact = build_artifact(
                dataset,
                "classdep",
                config.ratio,
                noise_seed,
                params,
                &train_rows,
                &val_rows,
                &corrupted,
            )?;
            Corruption { artifact: Some(artifact), true_matrix: Some(matrix), extra_seeds }
        }
        NoiseKind::Local => {
            let x_covered = dataset.features.select_rows(&covered).stage("corrupt")?;
            let (corrupted, _) =
                locally_concentrated(&x_covered, &clean, config.ratio, config.k, noise_seed)
                    .stage("corrupt")?;
            let mut params = BTreeMap::new();
            params.insert("k".into(), config.k.to_string());
            let artifact = build_artifact(
                dataset,
                "local",
                config.ratio,
                noise_seed,
                params,
                &train_rows,
                &val_rows,
                &corrupted,
            )?;
            Corruption { artifact: Some(artifact), true_matrix: None, extra_seeds }
        }
        NoiseKind::FeatureDependent => {
            let distill = distill_config(config, dataset)?;
            extra_seeds.insert("teacher_seed".into(), distill.teacher.seed);
            extra_seeds.insert("student_seed".into(), distill.student.seed);
            let outcome =
                distill_corrupt(dataset, &distill, config.ratio, noise_seed).stage("corrupt")?;
            Corruption { artifact: Some(outcome.labels), true_matrix: None, extra_seeds }
        }
    };
    Ok(corruption)
}

/// The teacher/student configuration a feature-dependent run uses: the run's
/// architecture and optimizer settings, with the teacher seeded `seed + 1`
/// and the student `seed + 2`.
pub fn distill_config(
    config: &ExperimentConfig,
    dataset: &Dataset,
) -> Result<DistillConfig, HarnessError> {
    let sizes = config.layer_sizes()?;
    let drops = config.dropout_rates(&sizes)?;
    check_dimensions(&sizes, dataset)?;
    let mut teacher = config.train_config();
    teacher.seed = config.seed + 1;
    let mut student = config.train_config();
    student.seed = config.seed + 2;
    Ok(DistillConfig {
        layer_sizes: sizes,
        dropout_rates: drops,
        teacher,
        student,
        temperature: config.temperature,
        alpha: config.alpha,
    })
}

fn check_dimensions(layer_sizes: &[usize], dataset: &Dataset) -> Result<(), HarnessError> {
    if layer_sizes.first() != Some(&dataset.features.cols()) {
        return Err(HarnessError::config(format!(
            "architecture input width {:?} does not match the dataset's {} features",
            layer_sizes.first(),
            dataset.features.cols()
        )));
    }
    if layer_sizes.last() != Some(&dataset.class_count) {
        return Err(HarnessError::config(format!(
            "architecture output width {:?} does not match the dataset's {} classes",
            layer_sizes.last(),
            dataset.class_count
        )));
    }
    Ok(())
}

/// Row-normalized confusion between clean and corrupted labels. Classes that
/// never occur among the clean labels keep an identity row.
pub fn empirical_transition(
    clean: &[usize],
    corrupted: &[usize],
    class_count: usize,
) -> Result<TransitionMatrix, HarnessError> {
    let counts = confusion_matrix(corrupted, clean, class_count).stage("train")?;
    let mut rows = vec![0.0; class_count * class_count];
    for i in 0..class_count {
        let total: f64 = (0..class_count).map(|j| counts.get(i, j)).sum();
        if total == 0.0 {
            rows[i * class_count + i] = 1.0;
            continue;
        }
        for j in 0..class_count {
            rows[i * class_count + j] = counts.get(i, j) / total;
        }
    }
    TransitionMatrix::new(class_count, rows).stage("train")
}

/// The matrix forward correction trains with: the true matrix when the noise
/// family defines one (regenerated or recorded in the artifact), otherwise
/// the empirical clean-versus-corrupted confusion, and the identity when no
/// noise was injected.
fn forward_matrix(
    corruption: &Corruption,
    dataset: &Dataset,
    covered: &[usize],
    overlay: &[usize],
) -> Result<TransitionMatrix, HarnessError> {
    if let Some(matrix) = &corruption.true_matrix {
        return Ok(matrix.clone());
    }
    let Some(artifact) = &corruption.artifact else {
        let size = dataset.class_count;
        let mut rows = vec![0.0; size * size];
        for i in 0..size {
            rows[i * size + i] = 1.0;
        }
        return TransitionMatrix::new(size, rows).stage("train");
    };
    if artifact.noise_type == "uniform" {
        return uniform_matrix(dataset.class_count, artifact.target_ratio).stage("train");
    }
    if let Some(encoded) = artifact.params.get("matrix") {
        let matrix: TransitionMatrix =
            serde_json::from_str(encoded).map_err(data_io::DataError::Json).stage("train")?;
        matrix.validate().stage("train")?;
        return Ok(matrix);
    }
    let clean: Vec<usize> = dataset.split_labels(covered);
    let noisy: Vec<usize> = covered.iter().map(|&r| overlay[r]).collect();
    empirical_transition(&clean, &noisy, dataset.class_count)
}

fn evaluate_pair(
    net: &FeedForwardNet,
    net_b: Option<&FeedForwardNet>,
    features: &Matrix,
    labels: &[usize],
) -> Result<f64, HarnessError> {
    let a = evaluate_accuracy(net, features, labels).stage("evaluate")?;
    match net_b {
        Some(b) => {
            let b_acc = evaluate_accuracy(b, features, labels).stage("evaluate")?;
            Ok((a + b_acc) / 2.0)
        }
        None => Ok(a),
    }
}

/// Trains and evaluates on an already corrupted dataset.
pub(crate) fn execute_with(
    dataset: &Dataset,
    config: &ExperimentConfig,
    corruption: &Corruption,
) -> Result<RunOutput, HarnessError> {
    let started = Instant::now();
    let sizes = config.layer_sizes()?;
    let drops = config.dropout_rates(&sizes)?;
    check_dimensions(&sizes, dataset)?;

    let (train_rows, val_rows) = covered_rows(dataset);
    if train_rows.is_empty() {
        return Err(HarnessError::config("training needs a non-empty train split".to_string()));
    }
    if dataset.splits.test.is_empty() {
        return Err(HarnessError::config("evaluation needs a non-empty test split".to_string()));
    }
    let covered: Vec<usize> = train_rows.iter().chain(&val_rows).copied().collect();

    let overlay = match &corruption.artifact {
        Some(artifact) => {
            artifact.validate(dataset).stage("train")?;
            artifact.overlay(dataset)
        }
        None => dataset.labels.clone(),
    };
    let noisy_train: Vec<usize> = train_rows.iter().map(|&r| overlay[r]).collect();
    let noisy_val: Vec<usize> = val_rows.iter().map(|&r| overlay[r]).collect();

    let x_train = dataset.features.select_rows(&train_rows).stage("train")?;
    let x_val = dataset.features.select_rows(&val_rows).stage("train")?;
    let val = if val_rows.is_empty() { None } else { Some((&x_val, noisy_val.as_slice())) };
    let train_config = config.train_config();

    let mut seeds = corruption.extra_seeds.clone();
    seeds.insert("seed".into(), config.seed);
    seeds.insert("split_seed".into(), config.split_seed);
    if let Some(artifact) = &corruption.artifact {
        seeds.insert("noise_seed".into(), artifact.seed);
    }

    let mut net = FeedForwardNet::init(sizes.clone(), drops.clone(), config.seed).stage("train")?;
    let mut net_b = None;
    let mut history_b = None;
    let history = match config.robust {
        RobustMethod::None => {
            let objective = HardLabelObjective { labels: &noisy_train };
            train(&mut net, &x_train, &objective, &noisy_train, val, &train_config).stage("train")?
        }
        RobustMethod::Forward => {
            let matrix = forward_matrix(corruption, dataset, &covered, &overlay)?;
            let objective = ForwardObjective::new(&noisy_train, &matrix).stage("train")?;
            train(&mut net, &x_train, &objective, &noisy_train, val, &train_config).stage("train")?
        }
        RobustMethod::Bootstrap => {
            let objective = BootstrapObjective {
                labels: &noisy_train,
                beta: config.beta,
                mode: config.bootstrap_mode.to_mode(),
            };
            train(&mut net, &x_train, &objective, &noisy_train, val, &train_config).stage("train")?
        }
        RobustMethod::CoTeaching => {
            let schedule =
                ForgetSchedule::new(config.effective_tau_max(), config.warmup).stage("train")?;
            seeds.insert("net_b_seed".into(), config.seed + 1);
            let mut state =
                CoTeachingState::new(sizes.clone(), drops.clone(), config.seed, config.seed + 1, schedule)
                    .stage("train")?;
            let (a, b) =
                co_teaching_train(&mut state, &x_train, &noisy_train, val, &train_config)
                    .stage("train")?;
            net = state.net_a;
            net_b = Some(state.net_b);
            history_b = Some(b);
            a
        }
    };

    let final_train_accuracy = evaluate_pair(&net, net_b.as_ref(), &x_train, &noisy_train)?;
    let final_val_accuracy = if val_rows.is_empty() {
        None
    } else {
        Some(evaluate_pair(&net, net_b.as_ref(), &x_val, &noisy_val)?)
    };
    let x_test = dataset.features.select_rows(&dataset.splits.test).stage("evaluate")?;
    let y_test = dataset.split_labels(&dataset.splits.test);
    let final_test_accuracy = evaluate_pair(&net, net_b.as_ref(), &x_test, &y_test)?;

    let sigma = if sizes.len() >= 3 {
        let features = net.extract_features(&x_train).stage("evaluate")?;
        let clean_train = dataset.split_labels(&train_rows);
        Some(sparsity_sigma(&features, &clean_train, dataset.class_count).stage("evaluate")?.sigma)
    } else {
        None
    };

    let (noise_type, target_ratio, realized_ratio) = match &corruption.artifact {
        Some(artifact) => {
            (artifact.noise_type.clone(), artifact.target_ratio, artifact.realized_ratio)
        }
        None => ("none".to_string(), 0.0, 0.0),
    };

    let report = RunReport {
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.echo(),
        seeds,
        noise_type,
        target_ratio,
        realized_ratio,
        sigma,
        final_train_accuracy,
        final_val_accuracy,
        final_test_accuracy,
        history,
        history_b,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { report, net, net_b, noisy: corruption.artifact.clone() })
}

/// Prepares the dataset and its corruption for one configuration.
///
/// When `config.labels` names a saved artifact, corruption is skipped and
/// the artifact's labels and coverage are used instead (its train/val
/// coverage replaces the freshly computed splits).
pub(crate) fn dataset_and_corruption(
    config: &ExperimentConfig,
) -> Result<(Dataset, Corruption), HarnessError> {
    let mut dataset = prepare_dataset(config)?;
    let corruption = if config.labels.is_empty() {
        corrupt_dataset(&dataset, config)?
    } else {
        let artifact =
            load_noisy_labels(Path::new(&config.labels), &dataset).stage("labels")?;
        dataset.splits.train = artifact.split_coverage.get("train").cloned().unwrap_or_default();
        dataset.splits.val = artifact.split_coverage.get("val").cloned().unwrap_or_default();
        Corruption { artifact: Some(artifact), true_matrix: None, extra_seeds: BTreeMap::new() }
    };
    Ok((dataset, corruption))
}

/// Runs the full pipeline for one configuration.
pub fn run_single(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let (dataset, corruption) = dataset_and_corruption(config)?;
    execute_with(&dataset, config, &corruption)
}

/// [`run_single`] with an explicit artifact path, as the `train` subcommand
/// uses.
pub fn run_with_labels(
    config: &ExperimentConfig,
    labels_path: &Path,
) -> Result<RunOutput, HarnessError> {
    let mut with_labels = config.clone();
    with_labels.labels = labels_path.display().to_string();
    run_single(&with_labels)
}

/// Generates the configured corruption and returns it with its dataset,
/// without training the final model.
pub fn corrupt_only(config: &ExperimentConfig) -> Result<(Dataset, NoisyLabelSet), HarnessError> {
    if config.noise == NoiseKind::None {
        return Err(HarnessError::config(
            "corrupt requires a noise type (uniform|classdep|local|featdep)".to_string(),
        ));
    }
    let dataset = prepare_dataset(config)?;
    let corruption = corrupt_dataset(&dataset, config)?;
    let artifact = corruption.artifact.expect("noise type is not none, so an artifact exists");
    Ok((dataset, artifact))
}
