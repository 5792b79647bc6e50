//! End-to-end pipeline tests on a small synthetic dataset.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use harness_cli::{
    compare_robust, corrupt_only, dropout_ablation, export_embedding, prepare_dataset,
    ratio_table, run_single, sweep_ratios, sweep_sizes, ExperimentConfig, RobustMethod, RunReport,
};

/// Three well-separated 2-D blobs, 60 rows per class, as a CSV file.
fn write_blobs_csv(dir: &Path) -> PathBuf {
    let centers = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)];
    let mut csv = String::from("f0,f1,label\n");
    for i in 0..180 {
        let class = i % 3;
        let (cx, cy) = centers[class];
        let dx = ((i * 37) % 100) as f64 / 100.0 - 0.5;
        let dy = ((i * 53) % 100) as f64 / 100.0 - 0.5;
        writeln!(csv, "{},{},{class}", cx + 0.8 * dx, cy + 0.8 * dy).unwrap();
    }
    let path = dir.join("blobs.csv");
    std::fs::write(&path, csv).unwrap();
    path
}

fn blob_config(dataset: &Path) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.dataset = dataset.display().to_string();
    config.format = harness_cli::DataFormat::Csv;
    config.train_fraction = 0.6;
    config.val_fraction = 0.2;
    config.test_fraction = 0.2;
    config.arch = "mlp:2,16,3".to_string();
    config.drop = "drop:0".to_string();
    config.epochs = 8;
    config.batch_size = 16;
    config.k = 5;
    config.validate().unwrap();
    config
}

fn assert_same_outcome(a: &RunReport, b: &RunReport) {
    assert_eq!(a.final_train_accuracy, b.final_train_accuracy);
    assert_eq!(a.final_val_accuracy, b.final_val_accuracy);
    assert_eq!(a.final_test_accuracy, b.final_test_accuracy);
    assert_eq!(a.realized_ratio, b.realized_ratio);
    assert_eq!(a.sigma, b.sigma);
    assert_eq!(a.history, b.history);
    assert_eq!(a.history_b, b.history_b);
}

#[test]
fn clean_run_learns_the_blobs() {
    let dir = tempfile::tempdir().unwrap();
    let config = blob_config(&write_blobs_csv(dir.path()));
    let output = run_single(&config).unwrap();
    let report = output.report;

    assert_eq!(report.noise_type, "none");
    assert_eq!(report.realized_ratio, 0.0);
    assert_eq!(report.history.epochs.len(), config.epochs);
    assert!(report.final_train_accuracy > 0.9, "{}", report.final_train_accuracy);
    assert!(report.final_test_accuracy > 0.9, "{}", report.final_test_accuracy);
    assert!(report.final_val_accuracy.unwrap() > 0.9);
    assert!(report.sigma.unwrap() > 0.0);
    assert!(output.noisy.is_none());
}

#[test]
fn reports_rerun_identically_from_their_echo() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = blob_config(&write_blobs_csv(dir.path()));
    config.noise = harness_cli::NoiseKind::Uniform;
    config.ratio = 0.25;
    config.seed = 3;
    let first = run_single(&config).unwrap().report;

    let pairs: Vec<(&str, &str)> =
        first.config.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    let echoed = ExperimentConfig::from_pairs(pairs).unwrap();
    let second = run_single(&echoed).unwrap().report;

    assert_same_outcome(&first, &second);
    assert_eq!(first.seeds, second.seeds);
    assert_eq!(first.config, second.config);
}

#[test]
fn saved_artifacts_reproduce_the_generating_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = blob_config(&write_blobs_csv(dir.path()));
    config.noise = harness_cli::NoiseKind::Uniform;
    config.ratio = 0.3;
    config.seed = 11;

    let direct = run_single(&config).unwrap();
    let (_, artifact) = corrupt_only(&config).unwrap();
    assert_eq!(Some(&artifact), direct.noisy.as_ref());

    let labels_path = dir.path().join("labels.json");
    data_io::save_noisy_labels(&labels_path, &artifact).unwrap();

    let mut reuse = config.clone();
    reuse.labels = labels_path.display().to_string();
    reuse.noise = harness_cli::NoiseKind::None;
    let replayed = run_single(&reuse).unwrap();

    assert_same_outcome(&direct.report, &replayed.report);
    assert_eq!(replayed.report.noise_type, "uniform");
}

#[test]
fn local_and_featdep_flip_exact_counts() {
    let dir = tempfile::tempdir().unwrap();
    let base = blob_config(&write_blobs_csv(dir.path()));
    let covered = 144;

    for (kind, ratio) in
        [(harness_cli::NoiseKind::Local, 0.25), (harness_cli::NoiseKind::FeatureDependent, 0.4)]
    {
        let mut config = base.clone();
        config.noise = kind;
        config.ratio = ratio;
        config.epochs = 3;
        let (_, artifact) = corrupt_only(&config).unwrap();
        assert_eq!(artifact.labels.len(), covered);
        let expected = (ratio * covered as f64).ceil() as usize;
        assert_eq!(artifact.flip_count(), expected, "{kind:?}");
    }
}

#[test]
fn classdep_records_its_matrix_in_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = blob_config(&write_blobs_csv(dir.path()));
    config.noise = harness_cli::NoiseKind::ClassDependent;
    config.ratio = 0.3;
    config.epochs = 3;
    let (_, artifact) = corrupt_only(&config).unwrap();

    assert_eq!(artifact.noise_type, "classdep");
    let encoded = artifact.params.get("matrix").expect("classdep artifacts carry their matrix");
    let matrix: noise_synth::TransitionMatrix = serde_json::from_str(encoded).unwrap();
    matrix.validate().unwrap();
    for class in 0..3 {
        assert!((matrix.get(class, class) - 0.7).abs() < 1e-9);
    }
}

#[test]
fn ratio_sweep_varies_only_the_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = blob_config(&write_blobs_csv(dir.path()));
    config.noise = harness_cli::NoiseKind::Uniform;
    config.epochs = 4;
    let reports = sweep_ratios(&config, &[0.1, 0.5]).unwrap();

    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].target_ratio, 0.1);
    assert_eq!(reports[1].target_ratio, 0.5);
    assert_eq!(reports[0].config.get("seed"), reports[1].config.get("seed"));

    let table = ratio_table(&reports);
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("ratio,noise_type,train_acc,val_acc,test_acc\n"));
}

#[test]
fn full_fraction_size_sweep_row_matches_run_single() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = blob_config(&write_blobs_csv(dir.path()));
    config.noise = harness_cli::NoiseKind::Uniform;
    config.ratio = 0.2;
    config.epochs = 4;

    let reports = sweep_sizes(&config, &[0.5, 1.0]).unwrap();
    assert_eq!(reports.len(), 2);
    let direct = run_single(&config).unwrap().report;
    assert_same_outcome(&reports[1], &direct);
    assert!(reports[0].config.get("dataset_fraction").unwrap() == "0.5");
}

#[test]
fn ablation_pairs_share_seeds_and_match_plain_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = blob_config(&write_blobs_csv(dir.path()));
    config.noise = harness_cli::NoiseKind::Uniform;
    config.ratio = 0.2;
    config.epochs = 4;
    config.drop = "drop:0.3".to_string();

    let ablation = dropout_ablation(&config).unwrap();
    assert_eq!(
        ablation.with_dropout.config.get("seed"),
        ablation.without_dropout.config.get("seed")
    );
    assert_eq!(ablation.without_dropout.config.get("drop").unwrap(), "drop:0");

    let mut zeroed = config.clone();
    zeroed.drop = "drop:0".to_string();
    let direct = run_single(&zeroed).unwrap().report;
    assert_same_outcome(&ablation.without_dropout, &direct);
}

#[test]
fn compare_rows_share_one_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = blob_config(&write_blobs_csv(dir.path()));
    config.noise = harness_cli::NoiseKind::Uniform;
    config.ratio = 0.3;
    config.epochs = 4;

    let methods = [
        RobustMethod::None,
        RobustMethod::Forward,
        RobustMethod::Bootstrap,
        RobustMethod::CoTeaching,
    ];
    let rows = compare_robust(&config, &methods).unwrap();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(row.report.realized_ratio, rows[0].report.realized_ratio);
        assert_eq!(row.report.config.get("robust").unwrap(), row.method.as_str());
        assert_eq!(row.report.history_b.is_some(), row.method == RobustMethod::CoTeaching);
    }
}

#[test]
fn embedding_export_agrees_with_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = blob_config(&write_blobs_csv(dir.path()));
    config.noise = harness_cli::NoiseKind::Uniform;
    config.ratio = 0.3;
    config.epochs = 4;

    let out = dir.path().join("embedding.csv");
    let (report, sparsity) = export_embedding(&config, &out).unwrap();
    assert_eq!(report.sigma, Some(sparsity.sigma));

    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 16 + 3);
    assert_eq!(&header[16..], ["clean_label", "noisy_label", "flipped"]);

    let mut flips = 0usize;
    let mut rows = 0usize;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 19);
        let clean: usize = cells[16].parse().unwrap();
        let noisy: usize = cells[17].parse().unwrap();
        let flagged = cells[18] == "1";
        assert_eq!(flagged, clean != noisy);
        flips += usize::from(flagged);
        rows += 1;
    }
    assert_eq!(rows, 108);

    let (_, artifact) = corrupt_only(&config).unwrap();
    let train_len = artifact.split_coverage.get("train").unwrap().len();
    let train_flips = artifact.flipped[..train_len].iter().filter(|&&f| f).count();
    assert_eq!(flips, train_flips);

    let sigma_text = std::fs::read_to_string(out.with_extension("sigma.json")).unwrap();
    let loaded: serde_json::Value = serde_json::from_str(&sigma_text).unwrap();
    assert_eq!(loaded["sigma"].as_f64(), Some(sparsity.sigma));
    assert_eq!(loaded["feature_width"].as_u64(), Some(16));
}

#[test]
fn idx_directories_use_the_holdout_as_test_split() {
    let dir = tempfile::tempdir().unwrap();
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for i in 0..90 {
        let class = (i % 3) as u8;
        pixels.extend_from_slice(&[class * 60, 255 - class * 60, i as u8, class * 80]);
        labels.push(class);
    }
    data_io::write_idx_images(&dir.path().join("train-images-idx3-ubyte"), &pixels, 90, 2, 2)
        .unwrap();
    data_io::write_idx_labels(&dir.path().join("train-labels-idx1-ubyte"), &labels).unwrap();
    data_io::write_idx_images(
        &dir.path().join("t10k-images-idx3-ubyte"),
        &pixels[..30 * 4],
        30,
        2,
        2,
    )
    .unwrap();
    data_io::write_idx_labels(&dir.path().join("t10k-labels-idx1-ubyte"), &labels[..30]).unwrap();

    let mut config = ExperimentConfig::default();
    config.dataset = dir.path().display().to_string();
    config.arch = "mlp:4,8,3".to_string();
    config.drop = "drop:0".to_string();
    let dataset = prepare_dataset(&config).unwrap();

    assert_eq!(dataset.len(), 120);
    assert_eq!(dataset.splits.test, (90..120).collect::<Vec<_>>());
    assert_eq!(dataset.splits.train.len() + dataset.splits.val.len(), 90);
}
