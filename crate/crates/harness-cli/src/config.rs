//! The flat key-value experiment configuration.
//!
//! A config file is plain text, one `key = value` per line, `#` comments and
//! blank lines allowed. Keys share their names with the CLI flags; flags
//! override file values. Unknown keys are rejected so a typo can never
//! silently fall back to a default. [`ExperimentConfig::echo`] renders the
//! complete effective configuration, and feeding that back through
//! [`ExperimentConfig::from_pairs`] reproduces the run exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nn_core::{parse_architecture, parse_dropout, TrainConfig};

use crate::{HarnessError, Stage};

/// On-disk dataset format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Idx,
    Csv,
}

impl DataFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            DataFormat::Idx => "idx",
            DataFormat::Csv => "csv",
        }
    }

    fn parse(value: &str) -> Result<Self, HarnessError> {
        match value {
            "idx" => Ok(DataFormat::Idx),
            "csv" => Ok(DataFormat::Csv),
            other => Err(HarnessError::config(format!(
                "format must be idx or csv, got '{other}'"
            ))),
        }
    }
}

/// Noise family injected into the train and val splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    Uniform,
    ClassDependent,
    Local,
    FeatureDependent,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Uniform => "uniform",
            NoiseKind::ClassDependent => "classdep",
            NoiseKind::Local => "local",
            NoiseKind::FeatureDependent => "featdep",
        }
    }

    pub fn parse(value: &str) -> Result<Self, HarnessError> {
        match value {
            "none" => Ok(NoiseKind::None),
            "uniform" => Ok(NoiseKind::Uniform),
            "classdep" => Ok(NoiseKind::ClassDependent),
            "local" => Ok(NoiseKind::Local),
            "featdep" => Ok(NoiseKind::FeatureDependent),
            other => Err(HarnessError::config(format!(
                "noise must be one of none|uniform|classdep|local|featdep, got '{other}'"
            ))),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Noise-robust training method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobustMethod {
    None,
    Forward,
    Bootstrap,
    CoTeaching,
}

impl RobustMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            RobustMethod::None => "none",
            RobustMethod::Forward => "forward",
            RobustMethod::Bootstrap => "bootstrap",
            RobustMethod::CoTeaching => "coteaching",
        }
    }

    pub fn parse(value: &str) -> Result<Self, HarnessError> {
        match value {
            "none" => Ok(RobustMethod::None),
            "forward" => Ok(RobustMethod::Forward),
            "bootstrap" => Ok(RobustMethod::Bootstrap),
            "coteaching" => Ok(RobustMethod::CoTeaching),
            other => Err(HarnessError::config(format!(
                "robust must be one of none|forward|bootstrap|coteaching, got '{other}'"
            ))),
        }
    }
}

impl fmt::Display for RobustMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bootstrap target mixing mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootstrapKind {
    Soft,
    Hard,
}

impl BootstrapKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BootstrapKind::Soft => "soft",
            BootstrapKind::Hard => "hard",
        }
    }

    fn parse(value: &str) -> Result<Self, HarnessError> {
        match value {
            "soft" => Ok(BootstrapKind::Soft),
            "hard" => Ok(BootstrapKind::Hard),
            other => Err(HarnessError::config(format!(
                "bootstrap_mode must be soft or hard, got '{other}'"
            ))),
        }
    }

    pub fn to_mode(self) -> robust_baselines::BootstrapMode {
        match self {
            BootstrapKind::Soft => robust_baselines::BootstrapMode::Soft,
            BootstrapKind::Hard => robust_baselines::BootstrapMode::Hard,
        }
    }
}

/// Everything a run needs, validated before any training starts.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// IDX directory or CSV file path.
    pub dataset: String,
    pub format: DataFormat,
    /// Label column name for CSV datasets.
    pub label_column: String,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub arch: String,
    pub drop: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub halving: usize,
    /// Training seed; noise application and derived models use offsets of it.
    pub seed: u64,
    pub noise: NoiseKind,
    pub ratio: f64,
    /// Distillation temperature for feature-dependent noise.
    pub temperature: f64,
    /// Hard-label weight in the distillation loss.
    pub alpha: f64,
    /// Neighbourhood size for locally-concentrated noise.
    pub k: usize,
    pub robust: RobustMethod,
    /// Bootstrap mixing weight.
    pub beta: f64,
    pub bootstrap_mode: BootstrapKind,
    /// Co-teaching maximum forget rate; `None` means the noise ratio.
    pub tau_max: Option<f64>,
    /// Co-teaching warmup epochs.
    pub warmup: usize,
    /// Stratified train-split subsample fraction.
    pub dataset_fraction: f64,
    /// Path to a saved noisy-label artifact; when set, runs train on those
    /// labels instead of generating noise.
    pub labels: String,
    /// Output path; meaning depends on the command.
    pub out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: String::new(),
            format: DataFormat::Idx,
            label_column: "label".into(),
            train_fraction: 5.0 / 6.0,
            val_fraction: 1.0 / 6.0,
            test_fraction: 0.0,
            split_seed: 0,
            arch: "mlp:784,256,128,10".into(),
            drop: "drop:0.5,0.5".into(),
            epochs: 40,
            batch_size: 64,
            lr: 0.1,
            momentum: 0.9,
            halving: 20,
            seed: 0,
            noise: NoiseKind::None,
            ratio: 0.35,
            temperature: 8.0,
            alpha: 0.3,
            k: 100,
            robust: RobustMethod::None,
            beta: 0.95,
            bootstrap_mode: BootstrapKind::Soft,
            tau_max: None,
            warmup: 10,
            dataset_fraction: 1.0,
            labels: String::new(),
            out: String::new(),
        }
    }
}

fn parse_number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| HarnessError::config(format!("key '{key}': cannot parse '{value}': {e}")))
}

impl ExperimentConfig {
    /// Applies one key-value pair; unknown keys are an error.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        match key {
            "dataset" => self.dataset = value.to_string(),
            "format" => self.format = DataFormat::parse(value)?,
            "label_column" => self.label_column = value.to_string(),
            "train_fraction" => self.train_fraction = parse_number(key, value)?,
            "val_fraction" => self.val_fraction = parse_number(key, value)?,
            "test_fraction" => self.test_fraction = parse_number(key, value)?,
            "split_seed" => self.split_seed = parse_number(key, value)?,
            "arch" => self.arch = value.to_string(),
            "drop" => self.drop = value.to_string(),
            "epochs" => self.epochs = parse_number(key, value)?,
            "batch_size" => self.batch_size = parse_number(key, value)?,
            "lr" => self.lr = parse_number(key, value)?,
            "momentum" => self.momentum = parse_number(key, value)?,
            "halving" => self.halving = parse_number(key, value)?,
            "seed" => self.seed = parse_number(key, value)?,
            "noise" => self.noise = NoiseKind::parse(value)?,
            "ratio" => self.ratio = parse_number(key, value)?,
            "temperature" => self.temperature = parse_number(key, value)?,
            "alpha" => self.alpha = parse_number(key, value)?,
            "k" => self.k = parse_number(key, value)?,
            "robust" => self.robust = RobustMethod::parse(value)?,
            "beta" => self.beta = parse_number(key, value)?,
            "bootstrap_mode" => self.bootstrap_mode = BootstrapKind::parse(value)?,
            "tau_max" => {
                self.tau_max =
                    if value == "auto" { None } else { Some(parse_number(key, value)?) };
            }
            "warmup" => self.warmup = parse_number(key, value)?,
            "dataset_fraction" => self.dataset_fraction = parse_number(key, value)?,
            "labels" => self.labels = value.to_string(),
            "out" => self.out = value.to_string(),
            other => {
                return Err(HarnessError::config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Builds a config from defaults plus the given pairs, then validates.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self, HarnessError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut config = ExperimentConfig::default();
        for (key, value) in pairs {
            config.apply(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// The complete effective configuration as canonical key-value pairs.
    ///
    /// Feeding the echo back through [`ExperimentConfig::from_pairs`]
    /// reconstructs this exact config, which is what makes reports rerunnable.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("dataset", self.dataset.clone());
        put("format", self.format.as_str().into());
        put("label_column", self.label_column.clone());
        put("train_fraction", self.train_fraction.to_string());
        put("val_fraction", self.val_fraction.to_string());
        put("test_fraction", self.test_fraction.to_string());
        put("split_seed", self.split_seed.to_string());
        put("arch", self.arch.clone());
        put("drop", self.drop.clone());
        put("epochs", self.epochs.to_string());
        put("batch_size", self.batch_size.to_string());
        put("lr", self.lr.to_string());
        put("momentum", self.momentum.to_string());
        put("halving", self.halving.to_string());
        put("seed", self.seed.to_string());
        put("noise", self.noise.as_str().into());
        put("ratio", self.ratio.to_string());
        put("temperature", self.temperature.to_string());
        put("alpha", self.alpha.to_string());
        put("k", self.k.to_string());
        put("robust", self.robust.as_str().into());
        put("beta", self.beta.to_string());
        put("bootstrap_mode", self.bootstrap_mode.as_str().into());
        put("tau_max", self.tau_max.map_or_else(|| "auto".into(), |t| t.to_string()));
        put("warmup", self.warmup.to_string());
        put("dataset_fraction", self.dataset_fraction.to_string());
        put("labels", self.labels.clone());
        put("out", self.out.clone());
        map
    }

    /// Cross-field validation; every run entry point calls this first.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let sizes = self.layer_sizes()?;
        self.dropout_rates(&sizes)?;

        let fractions = [
            ("train_fraction", self.train_fraction),
            ("val_fraction", self.val_fraction),
            ("test_fraction", self.test_fraction),
        ];
        for (name, f) in fractions {
            if !(f.is_finite() && (0.0..=1.0).contains(&f)) {
                return Err(HarnessError::config(format!("{name} must lie in [0, 1], got {f}")));
            }
        }
        let sum = self.train_fraction + self.val_fraction + self.test_fraction;
        if sum > 1.0 + 1e-9 {
            return Err(HarnessError::config(format!("split fractions sum to {sum} > 1")));
        }
        if self.train_fraction <= 0.0 {
            return Err(HarnessError::config("train_fraction must be positive".to_string()));
        }

        self.train_config().validate().stage("config")?;
        if self.epochs == 0 {
            return Err(HarnessError::config("epochs must be positive".to_string()));
        }
        if !(self.ratio.is_finite() && (0.0..1.0).contains(&self.ratio)) {
            return Err(HarnessError::config(format!("ratio must lie in [0, 1), got {}", self.ratio)));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(HarnessError::config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.alpha.is_finite() && (0.0..=1.0).contains(&self.alpha)) {
            return Err(HarnessError::config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.k == 0 {
            return Err(HarnessError::config("k must be positive".to_string()));
        }
        if !(self.beta.is_finite() && (0.0..=1.0).contains(&self.beta)) {
            return Err(HarnessError::config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if let Some(tau) = self.tau_max {
            if !(tau.is_finite() && (0.0..1.0).contains(&tau)) {
                return Err(HarnessError::config(format!("tau_max must lie in [0, 1), got {tau}")));
            }
        }
        if !(self.dataset_fraction.is_finite() && self.dataset_fraction > 0.0 && self.dataset_fraction <= 1.0) {
            return Err(HarnessError::config(format!(
                "dataset_fraction must lie in (0, 1], got {}",
                self.dataset_fraction
            )));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            base_lr: self.lr,
            momentum: self.momentum,
            halving_period: self.halving,
            seed: self.seed,
        }
    }

    pub fn layer_sizes(&self) -> Result<Vec<usize>, HarnessError> {
        parse_architecture(&self.arch).stage("config")
    }

    pub fn dropout_rates(&self, layer_sizes: &[usize]) -> Result<Vec<f64>, HarnessError> {
        parse_dropout(&self.drop, layer_sizes.len().saturating_sub(2)).stage("config")
    }

    /// A `drop:0,...` string matching this config's hidden layer count.
    pub fn zero_dropout_string(&self) -> Result<String, HarnessError> {
        let hidden = self.layer_sizes()?.len().saturating_sub(2);
        Ok(format!("drop:{}", vec!["0"; hidden].join(",")))
    }

    /// Effective co-teaching maximum forget rate: the explicit value if set,
    /// else the noise ratio (zero when no noise is injected).
    pub fn effective_tau_max(&self) -> f64 {
        self.tau_max.unwrap_or(match self.noise {
            NoiseKind::None => 0.0,
            _ => self.ratio,
        })
    }
}

/// Reads a flat key-value config file into ordered pairs.
///
/// Accepts `key = value` or `key=value`, one per line; `#` starts a comment;
/// blank lines are skipped. Later occurrences of a key override earlier ones
/// when applied in order.
pub fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| data_io::DataError::Io { path: path.display().to_string(), source: e })
        .stage("config")?;
    let mut pairs = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::config(format!(
                "{}:{}: expected 'key = value', got '{line}'",
                path.display(),
                line_no + 1
            )));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}
