//! `labelnoise`: corrupt datasets, train models, run the comparison
//! protocols.
//!
//! Every subcommand reads an optional `--config` file and the shared flags;
//! flags override file values. Exit codes: 0 success, 2 configuration
//! error, 3 data error, 4 numeric failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use harness_cli::{
    ablation_table, compare_robust, compare_table, corrupt_only, dropout_ablation,
    exit_code, export_embedding, parse_config_file, ratio_table, run_single, sigma_report,
    size_table, sweep_ratios, sweep_sizes, write_report, DropoutAblation, ExperimentConfig,
    HarnessError, RobustMethod, RunReport, Stage, ToolkitError, DEFAULT_RATIOS,
};

#[derive(Parser)]
#[command(name = "labelnoise", version, about = "Label-noise synthesis and training harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corrupt a dataset's train and val splits into a noisy-label artifact.
    Corrupt(CorruptArgs),
    /// Train on a (possibly corrupted) dataset and write a run report.
    Train(TrainArgs),
    /// Train and report the feature-sparsity measure of the final model.
    Sigma(CommonArgs),
    /// Sweep noise ratios, or train-split sizes with --sizes.
    Sweep(SweepArgs),
    /// Run the same experiment with and without dropout.
    AblateDropout(CommonArgs),
    /// Compare noise-robust training methods on one corruption.
    CompareRobust(CompareArgs),
    /// Export penultimate-layer features of the trained model as CSV.
    ExportEmbedding(CommonArgs),
}

/// Flags shared by all subcommands, mirroring the config file keys.
#[derive(Args)]
struct CommonArgs {
    /// Flat key-value config file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// IDX directory or CSV file.
    #[arg(long)]
    dataset: Option<String>,
    /// Dataset format: idx or csv.
    #[arg(long)]
    format: Option<String>,
    /// Noise type: none, uniform, classdep, local or featdep. ablate-dropout
    /// and compare-robust accept a comma-separated list.
    #[arg(long)]
    noise: Option<String>,
    /// Target noise ratio in [0, 1).
    #[arg(long)]
    ratio: Option<String>,
    /// Master seed; derived models use fixed offsets of it.
    #[arg(long)]
    seed: Option<String>,
    /// Distillation temperature for feature-dependent noise.
    #[arg(long)]
    temperature: Option<String>,
    /// Hard-label weight in the distillation loss.
    #[arg(long)]
    alpha: Option<String>,
    /// Neighbourhood size for locally-concentrated noise.
    #[arg(long)]
    k: Option<String>,
    /// Architecture string, e.g. mlp:784,256,128,10.
    #[arg(long)]
    arch: Option<String>,
    /// Dropout string, e.g. drop:0.5,0.5 (one rate per hidden layer).
    #[arg(long)]
    drop: Option<String>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<String>,
    /// Robust method: none, forward, bootstrap or coteaching.
    #[arg(long)]
    robust: Option<String>,
    /// Output path; meaning depends on the subcommand.
    #[arg(long)]
    out: Option<String>,
}

impl CommonArgs {
    fn flag_pairs(&self) -> Vec<(&'static str, &str)> {
        let flags = [
            ("dataset", &self.dataset),
            ("format", &self.format),
            ("noise", &self.noise),
            ("ratio", &self.ratio),
            ("seed", &self.seed),
            ("temperature", &self.temperature),
            ("alpha", &self.alpha),
            ("k", &self.k),
            ("arch", &self.arch),
            ("drop", &self.drop),
            ("epochs", &self.epochs),
            ("robust", &self.robust),
            ("out", &self.out),
        ];
        flags
            .into_iter()
            .filter_map(|(key, value)| value.as_ref().map(|v| (key, v.as_str())))
            .collect()
    }

    /// Builds the effective config: defaults, then the file, then the flags.
    /// `overrides` land last, after the flags.
    fn build(&self, overrides: &[(&str, &str)]) -> Result<ExperimentConfig, HarnessError> {
        let file_pairs = match &self.config {
            Some(path) => parse_config_file(path)?,
            None => Vec::new(),
        };
        let mut pairs: Vec<(&str, &str)> =
            file_pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        pairs.extend(self.flag_pairs());
        pairs.retain(|(key, _)| !overrides.iter().any(|(other, _)| other == key));
        pairs.extend_from_slice(overrides);
        ExperimentConfig::from_pairs(pairs)
    }

    /// Noise values for subcommands that loop over a comma-separated list.
    /// An empty vector means "use whatever the config file says".
    fn noise_list(&self) -> Vec<String> {
        match &self.noise {
            Some(list) => list.split(',').map(|part| part.trim().to_string()).collect(),
            None => Vec::new(),
        }
    }
}

#[derive(Args)]
struct CorruptArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Saved noisy-label artifact to train on instead of generating noise.
    #[arg(long)]
    labels: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated noise ratios (default 0.05 to 0.75 in steps of 0.10).
    #[arg(long)]
    ratios: Option<String>,
    /// Comma-separated train-split fractions; selects the size sweep.
    #[arg(long)]
    sizes: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated methods (default none,forward,bootstrap,coteaching).
    #[arg(long)]
    methods: Option<String>,
}

fn required_out(config: &ExperimentConfig) -> Result<PathBuf, HarnessError> {
    if config.out.is_empty() {
        return Err(HarnessError::config("an output path is required (--out)".to_string()));
    }
    Ok(PathBuf::from(&config.out))
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(ToolkitError::Io).stage("write")
}

fn write_reports_json(table_path: &Path, reports: &[RunReport]) -> Result<PathBuf, HarnessError> {
    let path = table_path.with_extension("reports.json");
    let mut text = serde_json::to_string_pretty(reports)
        .map_err(data_io::DataError::Json)
        .stage("write")?;
    text.push('\n');
    write_text(&path, &text)?;
    Ok(path)
}

fn parse_f64_list(flag: &str, list: &str) -> Result<Vec<f64>, HarnessError> {
    list.split(',')
        .map(|part| {
            part.trim().parse::<f64>().map_err(|_| {
                HarnessError::config(format!("--{flag}: cannot parse '{}' as a number", part.trim()))
            })
        })
        .collect()
}

fn parse_methods(list: &str) -> Result<Vec<RobustMethod>, HarnessError> {
    list.split(',').map(|part| RobustMethod::parse(part.trim())).collect()
}

fn cmd_corrupt(args: &CorruptArgs) -> Result<(), HarnessError> {
    let config = args.common.build(&[])?;
    let out = required_out(&config)?;
    let (_, artifact) = corrupt_only(&config)?;
    data_io::save_noisy_labels(&out, &artifact).stage("write")?;
    println!(
        "wrote {} ({} noise, {} of {} labels flipped, realized ratio {:.4})",
        out.display(),
        artifact.noise_type,
        artifact.flip_count(),
        artifact.labels.len(),
        artifact.realized_ratio
    );
    Ok(())
}

fn print_run_summary(report: &RunReport) {
    let val = report
        .final_val_accuracy
        .map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
    println!(
        "{} noise at ratio {:.2} (realized {:.4}): train {:.4}, val {}, test {:.4}",
        report.noise_type,
        report.target_ratio,
        report.realized_ratio,
        report.final_train_accuracy,
        val,
        report.final_test_accuracy
    );
}

fn cmd_train(args: &TrainArgs) -> Result<(), HarnessError> {
    let overrides: Vec<(&str, &str)> =
        args.labels.iter().map(|l| ("labels", l.as_str())).collect();
    let config = args.common.build(&overrides)?;
    let out = required_out(&config)?;
    let output = run_single(&config)?;
    write_report(&output.report, &out)?;
    print_run_summary(&output.report);
    println!("report at {}", out.display());
    Ok(())
}

fn cmd_sigma(args: &CommonArgs) -> Result<(), HarnessError> {
    let config = args.build(&[])?;
    let out = required_out(&config)?;
    let (report, sparsity) = sigma_report(&config)?;
    let mut text = serde_json::to_string_pretty(&sparsity)
        .map_err(data_io::DataError::Json)
        .stage("write")?;
    text.push('\n');
    write_text(&out, &text)?;
    print_run_summary(&report);
    println!("sigma {:.6}, report at {}", sparsity.sigma, out.display());
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), HarnessError> {
    if args.ratios.is_some() && args.sizes.is_some() {
        return Err(HarnessError::config(
            "--ratios and --sizes select different sweeps; give only one".to_string(),
        ));
    }
    let config = args.common.build(&[])?;
    let out = required_out(&config)?;
    let (reports, table) = if let Some(sizes) = &args.sizes {
        let fractions = parse_f64_list("sizes", sizes)?;
        let reports = sweep_sizes(&config, &fractions)?;
        let table = size_table(&reports);
        (reports, table)
    } else {
        let ratios = match &args.ratios {
            Some(list) => parse_f64_list("ratios", list)?,
            None => DEFAULT_RATIOS.to_vec(),
        };
        let reports = sweep_ratios(&config, &ratios)?;
        let table = ratio_table(&reports);
        (reports, table)
    };
    write_text(&out, &table)?;
    let reports_path = write_reports_json(&out, &reports)?;
    println!("{} runs; table at {}, reports at {}", reports.len(), out.display(), reports_path.display());
    Ok(())
}

fn cmd_ablate(args: &CommonArgs) -> Result<(), HarnessError> {
    let noise_list = args.noise_list();
    let mut ablations: Vec<DropoutAblation> = Vec::new();
    let mut out = None;
    if noise_list.is_empty() {
        let config = args.build(&[])?;
        out = Some(required_out(&config)?);
        ablations.push(dropout_ablation(&config)?);
    } else {
        for noise in &noise_list {
            let config = args.build(&[("noise", noise.as_str())])?;
            if out.is_none() {
                out = Some(required_out(&config)?);
            }
            ablations.push(dropout_ablation(&config)?);
        }
    }
    let out = out.expect("at least one ablation ran");
    write_text(&out, &ablation_table(&ablations))?;
    let mut reports = Vec::new();
    for ablation in &ablations {
        reports.push(ablation.with_dropout.clone());
        reports.push(ablation.without_dropout.clone());
    }
    let reports_path = write_reports_json(&out, &reports)?;
    println!(
        "{} ablation pairs; table at {}, reports at {}",
        ablations.len(),
        out.display(),
        reports_path.display()
    );
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), HarnessError> {
    let methods = match &args.methods {
        Some(list) => parse_methods(list)?,
        None => vec![
            RobustMethod::None,
            RobustMethod::Forward,
            RobustMethod::Bootstrap,
            RobustMethod::CoTeaching,
        ],
    };
    let noise_list = args.common.noise_list();
    let mut rows = Vec::new();
    let mut out = None;
    if noise_list.is_empty() {
        let config = args.common.build(&[])?;
        out = Some(required_out(&config)?);
        rows.extend(compare_robust(&config, &methods)?);
    } else {
        for noise in &noise_list {
            let config = args.common.build(&[("noise", noise.as_str())])?;
            if out.is_none() {
                out = Some(required_out(&config)?);
            }
            rows.extend(compare_robust(&config, &methods)?);
        }
    }
    let out = out.expect("at least one comparison ran");
    write_text(&out, &compare_table(&rows))?;
    let reports: Vec<RunReport> = rows.iter().map(|r| r.report.clone()).collect();
    let reports_path = write_reports_json(&out, &reports)?;
    println!(
        "{} runs; table at {}, reports at {}",
        rows.len(),
        out.display(),
        reports_path.display()
    );
    Ok(())
}

fn cmd_embed(args: &CommonArgs) -> Result<(), HarnessError> {
    let config = args.build(&[])?;
    let out = required_out(&config)?;
    let (report, sparsity) = export_embedding(&config, &out)?;
    write_report(&report, &out.with_extension("report.json"))?;
    print_run_summary(&report);
    println!(
        "embedding at {}, sigma {:.6} at {}",
        out.display(),
        sparsity.sigma,
        out.with_extension("sigma.json").display()
    );
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::Corrupt(args) => cmd_corrupt(args),
        Command::Train(args) => cmd_train(args),
        Command::Sigma(args) => cmd_sigma(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::AblateDropout(args) => cmd_ablate(args),
        Command::CompareRobust(args) => cmd_compare(args),
        Command::ExportEmbedding(args) => cmd_embed(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(&cli) {
        eprintln!("error: {err}");
        std::process::exit(i32::from(exit_code(&err)));
    }
}
