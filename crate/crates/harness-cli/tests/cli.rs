//! Exercises the `labelnoise` binary end to end: exit codes, artifacts and
//! report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn labelnoise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelnoise"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn write_blobs_csv(dir: &Path) -> PathBuf {
    let centers = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)];
    let mut csv = String::from("f0,f1,label\n");
    for i in 0..120 {
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

/// A config file pointing at a fresh blobs dataset with a tiny net. Lines in
/// `extra` land after the defaults, so they can override any key.
fn write_conf(dir: &Path, extra: &str) -> PathBuf {
    let dataset = write_blobs_csv(dir);
    let text = format!(
        "dataset = {}\nformat = csv\ntrain_fraction = 0.6\nval_fraction = 0.2\ntest_fraction = 0.2\narch = mlp:2,8,3\ndrop = drop:0\nepochs = 4\n{extra}",
        dataset.display()
    );
    let path = dir.join("run.conf");
    std::fs::write(&path, text).unwrap();
    path
}

fn run_conf(conf: &Path, extra: &[&str]) -> Output {
    let mut args: Vec<&str> = extra.to_vec();
    let conf_str = conf.display().to_string();
    args.push("--config");
    args.push(&conf_str);
    labelnoise(&args)
}

#[test]
fn corrupt_then_train_on_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "");
    let labels = dir.path().join("labels.json");
    let report = dir.path().join("report.json");

    let corrupt = run_conf(
        &conf,
        &[
            "corrupt",
            "--noise",
            "uniform",
            "--ratio",
            "0.3",
            "--seed",
            "7",
            "--out",
            &labels.display().to_string(),
        ],
    );
    assert!(corrupt.status.success(), "{}", String::from_utf8_lossy(&corrupt.stderr));
    let stdout = String::from_utf8_lossy(&corrupt.stdout);
    assert!(stdout.contains("uniform noise"), "{stdout}");

    let train = run_conf(
        &conf,
        &[
            "train",
            "--labels",
            &labels.display().to_string(),
            "--seed",
            "7",
            "--out",
            &report.display().to_string(),
        ],
    );
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));

    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["noise_type"], "uniform");
    assert_eq!(parsed["config"]["labels"], labels.display().to_string());
    assert!(parsed["final_test_accuracy"].as_f64().unwrap() <= 1.0);
    assert_eq!(parsed["toolkit_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "noise = uniform\nratio = 0.2\n");
    let labels = dir.path().join("labels.json");

    let output = run_conf(
        &conf,
        &["corrupt", "--ratio", "0.4", "--out", &labels.display().to_string()],
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let artifact: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&labels).unwrap()).unwrap();
    assert_eq!(artifact["target_ratio"].as_f64(), Some(0.4));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "");

    let bad_value = run_conf(&conf, &["train", "--ratio", "nope", "--out", "r.json"]);
    assert_eq!(bad_value.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_value.stderr).contains("ratio"));

    let bad_conf = dir.path().join("bad.conf");
    std::fs::write(&bad_conf, "learning_rate = 0.1\n").unwrap();
    let unknown_key = run_conf(&bad_conf, &["train", "--out", "r.json"]);
    assert_eq!(unknown_key.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown_key.stderr).contains("unknown config key"));

    let missing_out = run_conf(&conf, &["train"]);
    assert_eq!(missing_out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let output = labelnoise(&[
        "corrupt",
        "--dataset",
        &missing.display().to_string(),
        "--noise",
        "uniform",
        "--out",
        "labels.json",
    ]);
    assert_eq!(output.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&output.stderr).contains("load stage failed"));
}

#[test]
fn non_finite_inputs_are_rejected_up_front() {
    let nan_dir = tempfile::tempdir().unwrap();
    let conf = write_conf(nan_dir.path(), "lr = nan\n");
    let out = nan_dir.path().join("r.json");

    let output = run_conf(&conf, &["train", "--out", &out.display().to_string()]);
    assert_eq!(output.status.code(), Some(2), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(String::from_utf8_lossy(&output.stderr).contains("finite"));

    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "");
    let dataset = dir.path().join("blobs.csv");
    let mut csv = std::fs::read_to_string(&dataset).unwrap();
    csv.push_str("inf,0.1,0\n");
    std::fs::write(&dataset, csv).unwrap();
    let out = dir.path().join("r.json");

    let output = run_conf(&conf, &["train", "--out", &out.display().to_string()]);
    assert_eq!(output.status.code(), Some(3), "{}", String::from_utf8_lossy(&output.stderr));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("load stage failed"), "{stderr}");
    assert!(stderr.contains("non-finite value"), "{stderr}");
}

#[test]
fn sweep_writes_table_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "");
    let table = dir.path().join("ratios.csv");

    let output = run_conf(
        &conf,
        &[
            "sweep",
            "--noise",
            "uniform",
            "--ratios",
            "0.1,0.3",
            "--out",
            &table.display().to_string(),
        ],
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let text = std::fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "ratio,noise_type,train_acc,val_acc,test_acc");
    assert!(lines[1].starts_with("0.1,uniform,"));
    assert!(lines[2].starts_with("0.3,uniform,"));

    let reports: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(table.with_extension("reports.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);
}

#[test]
fn size_sweep_uses_the_fraction_column() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "noise = uniform\nratio = 0.2\n");
    let table = dir.path().join("sizes.csv");

    let output = run_conf(
        &conf,
        &["sweep", "--sizes", "0.5,1.0", "--out", &table.display().to_string()],
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("fraction,noise_type,train_acc,val_acc,test_acc\n"));
    assert!(text.contains("\n0.5,uniform,"));
    assert!(text.contains("\n1,uniform,"));
}

#[test]
fn compare_robust_tabulates_methods_by_noise() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "ratio = 0.3\nk = 5\n");
    let table = dir.path().join("compare.csv");

    let output = run_conf(
        &conf,
        &[
            "compare-robust",
            "--noise",
            "uniform,local",
            "--methods",
            "none,forward",
            "--out",
            &table.display().to_string(),
        ],
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let text = std::fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "noise_type,none,forward");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("uniform,"));
    assert!(lines[2].starts_with("local,"));
}

#[test]
fn ablate_dropout_pairs_each_noise_type() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "drop = drop:0.4\nratio = 0.3\n");
    let table = dir.path().join("ablation.csv");

    let output = run_conf(
        &conf,
        &["ablate-dropout", "--noise", "none,uniform", "--out", &table.display().to_string()],
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let text = std::fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "noise_type,test_with_dropout,test_without_dropout,relative_gain");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("none,"));
    assert!(lines[2].starts_with("uniform,"));
}

#[test]
fn sigma_and_embedding_emit_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_conf(dir.path(), "noise = uniform\nratio = 0.2\n");

    let sigma_out = dir.path().join("sigma.json");
    let sigma = run_conf(&conf, &["sigma", "--out", &sigma_out.display().to_string()]);
    assert!(sigma.status.success(), "{}", String::from_utf8_lossy(&sigma.stderr));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&sigma_out).unwrap()).unwrap();
    assert!(parsed["sigma"].as_f64().unwrap() >= 0.0);
    assert_eq!(parsed["class_count"].as_u64(), Some(3));

    let embed_out = dir.path().join("embedding.csv");
    let embed =
        run_conf(&conf, &["export-embedding", "--out", &embed_out.display().to_string()]);
    assert!(embed.status.success(), "{}", String::from_utf8_lossy(&embed.stderr));
    let csv = std::fs::read_to_string(&embed_out).unwrap();
    assert!(csv.starts_with("f0,f1,f2,f3,f4,f5,f6,f7,clean_label,noisy_label,flipped\n"));
    assert!(embed_out.with_extension("sigma.json").exists());
    assert!(embed_out.with_extension("report.json").exists());
}
