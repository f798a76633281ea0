//! Run configuration: command-line flags merged over an optional manifest.
//!
//! A manifest is a flat TOML table. Every key mirrors a long flag with dashes
//! replaced by underscores; lists are TOML arrays. Unknown keys are errors.
//!
//! ```toml
//! dataset = "isolet/isolet1+2+3+4.data"
//! test = "isolet/isolet5.data"
//! encoder = "id-level"
//! d = 10000
//! l = 1024
//! q = 16
//! threshold = 1.0        # percent
//! values_d = [200, 500, 1000, 2000, 4000, 6000, 8000, 10000]
//! ```

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use microhd::data::{CsvOptions, LabelColumn, Normalization};
use microhd::model::{EncoderKind, HdcConfig, Similarity, TrainOptions, UpdateRule};
use microhd::optimizer::ParamSpace;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Idx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderArg {
    IdLevel,
    Projection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationArg {
    None,
    Minmax,
    Zscore,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateArg {
    Perceptron,
    SimilarityWeighted,
}

/// Flags shared by `train`, `optimize` and `evaluate`.
#[derive(Args, Clone, Debug, Default)]
pub struct DataFlags {
    /// Training data: a CSV file, or a directory of MNIST-style IDX files.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Separate test data. Without it 20% of the dataset is held out.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// `last`, a 0-based column index, or a header name.
    #[arg(long)]
    pub label_column: Option<String>,
    /// The CSV has a header row.
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_enum)]
    pub normalization: Option<NormalizationArg>,
    /// Flat TOML manifest; flags take precedence over its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct ModelFlags {
    #[arg(long, value_enum)]
    pub encoder: Option<EncoderArg>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub update: Option<UpdateArg>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct SearchFlags {
    /// Tolerated evaluation-accuracy drop, in percent.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub values_d: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub values_l: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub values_q: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    dataset: Option<PathBuf>,
    test: Option<PathBuf>,
    format: Option<Format>,
    label_column: Option<toml::Value>,
    header: Option<bool>,
    normalization: Option<NormalizationArg>,
    threads: Option<usize>,
    encoder: Option<EncoderArg>,
    d: Option<usize>,
    l: Option<usize>,
    q: Option<u32>,
    epochs: Option<usize>,
    lr: Option<f64>,
    seed: Option<u64>,
    update: Option<UpdateArg>,
    out: Option<PathBuf>,
    threshold: Option<f64>,
    values_d: Option<Vec<usize>>,
    values_l: Option<Vec<usize>>,
    values_q: Option<Vec<usize>>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }
}

/// Dataset location and parsing options.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSpec {
    pub dataset: PathBuf,
    pub test: Option<PathBuf>,
    pub format: Format,
    pub csv: CsvOptions,
    pub normalization: Normalization,
}

/// Everything a command needs, after merging flags over the manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: DataSpec,
    pub encoder: EncoderKind,
    pub d: usize,
    pub l: usize,
    pub q: u32,
    pub threshold_percent: f64,
    pub space: ParamSpace,
    pub train: TrainOptions,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn baseline(&self, features: usize, classes: usize) -> HdcConfig {
        match self.encoder {
            EncoderKind::IdLevel => HdcConfig::id_level(features, classes, self.d, self.l, self.q),
            EncoderKind::Projection => HdcConfig::projection(features, classes, self.d, self.q),
        }
    }
}

fn parse_label_column(raw: &str) -> LabelColumn {
    if raw == "last" {
        LabelColumn::Last
    } else if let Ok(i) = raw.parse() {
        LabelColumn::Index(i)
    } else {
        LabelColumn::Name(raw.to_string())
    }
}

fn manifest_label_column(v: &toml::Value) -> Result<LabelColumn, CliError> {
    match v {
        toml::Value::String(s) => Ok(parse_label_column(s)),
        toml::Value::Integer(i) if *i >= 0 => Ok(LabelColumn::Index(*i as usize)),
        other => Err(CliError::usage(format!("label_column must be a string or a non-negative integer, got {other}"))),
    }
}

/// Resolves a dataset path: as given when it exists, otherwise relative to
/// `$MICROHD_DATA_DIR`.
pub fn resolve_path(path: &Path) -> Result<PathBuf, CliError> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(root) = std::env::var_os("MICROHD_DATA_DIR") {
            let candidate = Path::new(&root).join(path);
            if candidate.exists() {
                return Ok(candidate);
            }
        }
    }
    Err(CliError::usage(format!("dataset path {} does not exist", path.display())))
}

pub fn resolve_data(flags: &DataFlags, m: &Manifest, default_normalization: Normalization) -> Result<DataSpec, CliError> {
    let raw = flags
        .dataset
        .clone()
        .or_else(|| m.dataset.clone())
        .ok_or_else(|| CliError::usage("--dataset is required"))?;
    let dataset = resolve_path(&raw)?;
    let test = flags.test.clone().or_else(|| m.test.clone()).map(|p| resolve_path(&p)).transpose()?;
    let format = flags.format.or(m.format).unwrap_or(if dataset.is_dir() { Format::Idx } else { Format::Csv });
    let label_column = match (&flags.label_column, &m.label_column) {
        (Some(s), _) => parse_label_column(s),
        (None, Some(v)) => manifest_label_column(v)?,
        (None, None) => LabelColumn::Last,
    };
    let csv = CsvOptions { label_column, has_header: flags.header || m.header.unwrap_or(false), ..Default::default() };
    let normalization = match flags.normalization.or(m.normalization) {
        Some(NormalizationArg::None) => Normalization::None,
        Some(NormalizationArg::Minmax) => Normalization::MinMax,
        Some(NormalizationArg::Zscore) => Normalization::ZScore,
        None => default_normalization,
    };
    Ok(DataSpec { dataset, test, format, csv, normalization })
}

pub fn resolve(data: &DataFlags, model: &ModelFlags, search: &SearchFlags) -> Result<RunConfig, CliError> {
    let m = match &data.config {
        Some(p) => Manifest::load(p)?,
        None => Manifest::default(),
    };
    let encoder = match model.encoder.or(m.encoder).unwrap_or(EncoderArg::IdLevel) {
        EncoderArg::IdLevel => EncoderKind::IdLevel,
        EncoderArg::Projection => EncoderKind::Projection,
    };
    if encoder == EncoderKind::Projection && (model.l.is_some() || search.values_l.is_some()) {
        return Err(CliError::usage("--l and --values-l apply only to the id-level encoder"));
    }
    let default_normalization = match encoder {
        EncoderKind::IdLevel => Normalization::MinMax,
        EncoderKind::Projection => Normalization::ZScore,
    };
    let data_spec = resolve_data(data, &m, default_normalization)?;

    let epochs = model.epochs.or(m.epochs).unwrap_or(30);
    if epochs == 0 {
        return Err(CliError::usage("--epochs must be at least 1"));
    }
    let lr = model.lr.or(m.lr).unwrap_or(1.0);
    if !(lr.is_finite() && lr > 0.0) {
        return Err(CliError::usage(format!("--lr must be positive, got {lr}")));
    }
    let threshold_percent = search.threshold.or(m.threshold).unwrap_or(1.0);
    if !(threshold_percent.is_finite() && threshold_percent >= 0.0) {
        return Err(CliError::usage(format!("--threshold must be a non-negative percentage, got {threshold_percent}")));
    }
    let update = match model.update.or(m.update).unwrap_or(UpdateArg::Perceptron) {
        UpdateArg::Perceptron => UpdateRule::Perceptron,
        UpdateArg::SimilarityWeighted => UpdateRule::SimilarityWeighted,
    };
    let defaults = ParamSpace::default();
    let space = ParamSpace {
        d: search.values_d.clone().or_else(|| m.values_d.clone()).unwrap_or(defaults.d),
        l: search.values_l.clone().or_else(|| m.values_l.clone()).unwrap_or(defaults.l),
        q: search.values_q.clone().or_else(|| m.values_q.clone()).unwrap_or(defaults.q),
    };
    let threads = data.threads.or(m.threads);
    if threads == Some(0) {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    Ok(RunConfig {
        data: data_spec,
        encoder,
        d: model.d.or(m.d).unwrap_or(10_000),
        l: if encoder == EncoderKind::IdLevel { model.l.or(m.l).unwrap_or(1024) } else { 0 },
        q: model.q.or(m.q).unwrap_or(16),
        threshold_percent,
        space,
        train: TrainOptions { epochs, lr, update, similarity: Similarity::Cosine, shuffle_seed: None },
        seed: model.seed.or(m.seed).unwrap_or(0),
        threads,
        out: model.out.clone().or_else(|| m.out.clone()).unwrap_or_else(|| PathBuf::from("microhd-out")),
    })
}
