//! Datasets: ingestion, train/eval splitting and feature normalization.

mod csv;
mod idx;
mod synthetic;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::HdRng;

pub use self::csv::{load_csv, load_csv_with_classes, CsvOptions, LabelColumn};
pub use self::synthetic::{blobs, BlobSpec};
pub use self::idx::{load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Csv,
    Idx,
    Memory,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub path: PathBuf,
    pub format: SourceFormat,
}

/// `N x f` samples with dense labels in `[0, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f32>,
    n_features: usize,
    labels: Vec<usize>,
    classes: Vec<String>,
    provenance: Provenance,
}

impl Dataset {
    /// Builds a dataset from row-major samples. `classes` names every label;
    /// its length is the class count.
    pub fn new(features: Vec<f32>, n_features: usize, labels: Vec<usize>, classes: Vec<String>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidConfig("datasets need at least one feature".into()));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch { left: labels.len() * n_features, right: features.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes.len()) {
            return Err(Error::InvalidConfig(format!("label {bad} outside [0, {})", classes.len())));
        }
        if let Some(pos) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "non-finite value in sample {} feature {}",
                pos / n_features,
                pos % n_features
            )));
        }
        Ok(Self {
            features,
            n_features,
            labels,
            classes,
            provenance: Provenance { path: PathBuf::new(), format: SourceFormat::Memory },
        })
    }

    pub fn with_provenance(mut self, path: impl Into<PathBuf>, format: SourceFormat) -> Self {
        self.provenance = Provenance { path: path.into(), format };
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.sample(i));
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Stratified split into `(first, second)`: each class is shuffled with
/// `rng` and its first `round(n_c * ratio)` samples go to `first`. Classes
/// with fewer than two samples go entirely to `first`. Both parts are then
/// shuffled once more so classes interleave.
pub fn split_with(dataset: &Dataset, ratio: f64, rng: &mut HdRng) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes()];
    for (i, &y) in dataset.labels().iter().enumerate() {
        per_class[y].push(i);
    }
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for (class, mut members) in per_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            log::warn!("class {class} has {} sample(s); keeping it in the training part", members.len());
            first.extend(members);
            continue;
        }
        members.shuffle(rng);
        let take = ((members.len() as f64 * ratio).round() as usize).clamp(1, members.len() - 1);
        first.extend_from_slice(&members[..take]);
        second.extend_from_slice(&members[take..]);
    }
    first.shuffle(rng);
    second.shuffle(rng);
    Ok((dataset.subset(&first), dataset.subset(&second)))
}

/// Seeded stratified split; see [`split_with`].
pub fn split(dataset: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    split_with(dataset, ratio, &mut HdRng::new(seed))
}

/// Per-feature statistics of a training split.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let f = data.n_features();
        let n = data.len() as f64;
        let mut min = vec![f64::INFINITY; f];
        let mut max = vec![f64::NEG_INFINITY; f];
        let mut sum = vec![0.0; f];
        for i in 0..data.len() {
            for (j, &x) in data.sample(i).iter().enumerate() {
                let x = x as f64;
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
                sum[j] += x;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let mut var = vec![0.0; f];
        for i in 0..data.len() {
            for (j, &x) in data.sample(i).iter().enumerate() {
                var[j] += (x as f64 - mean[j]).powi(2);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt()).collect();
        Ok(Self { min, max, mean, std })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    None,
    /// Per-feature `[0, 1]` from the training min and max.
    MinMax,
    /// Per-feature zero mean and unit variance.
    ZScore,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::None => "none",
            Normalization::MinMax => "minmax",
            Normalization::ZScore => "zscore",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "minmax" => Ok(Normalization::MinMax),
            "zscore" => Ok(Normalization::ZScore),
            other => Err(Error::InvalidConfig(format!("unknown normalization `{other}`"))),
        }
    }
}

/// Applies `scheme` using `stats`. Constant features map to 0. Rows outside
/// the training range are not clipped.
pub fn normalize(data: &Dataset, stats: &FeatureStats, scheme: Normalization) -> Result<Dataset> {
    if stats.min.len() != data.n_features() {
        return Err(Error::DimensionMismatch { left: stats.min.len(), right: data.n_features() });
    }
    let f = data.n_features();
    let features = data
        .features()
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let j = k % f;
            let x = x as f64;
            let v = match scheme {
                Normalization::None => x,
                Normalization::MinMax => {
                    let range = stats.max[j] - stats.min[j];
                    if range > 0.0 { (x - stats.min[j]) / range } else { 0.0 }
                }
                Normalization::ZScore => {
                    if stats.std[j] > 0.0 { (x - stats.mean[j]) / stats.std[j] } else { 0.0 }
                }
            };
            v as f32
        })
        .collect();
    Ok(Dataset { features, ..data.clone() })
}

/// Normalized train, evaluation and test splits of one workload.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Dataset,
    pub eval: Dataset,
    pub test: Dataset,
    pub stats: FeatureStats,
}

/// Splits `source` 80/20 into train and evaluation parts and normalizes all
/// three parts with statistics of the train part. Without a separate `test`
/// set, 20% of `source` is held out as the test set first.
pub fn prepare(source: &Dataset, test: Option<&Dataset>, seed: u64, normalization: Normalization) -> Result<Splits> {
    if source.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let seeds = crate::rng::Seeds(seed);
    let (pool, test) = match test {
        Some(t) => {
            if t.n_features() != source.n_features() {
                return Err(Error::DimensionMismatch { left: source.n_features(), right: t.n_features() });
            }
            (source.clone(), t.clone())
        }
        None => split_with(source, 0.8, &mut seeds.holdout())?,
    };
    let (train, eval) = split_with(&pool, 0.8, &mut seeds.split())?;
    if eval.is_empty() || test.is_empty() {
        return Err(Error::InvalidConfig("too few samples to form evaluation and test splits".into()));
    }
    let stats = FeatureStats::from_dataset(&train)?;
    Ok(Splits {
        train: normalize(&train, &stats, normalization)?,
        eval: normalize(&eval, &stats, normalization)?,
        test: normalize(&test, &stats, normalization)?,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(labels: Vec<usize>, classes: usize) -> Dataset {
        let n = labels.len();
        let features = (0..n * 2).map(|i| i as f32).collect();
        Dataset::new(features, 2, labels, (0..classes).map(|c| c.to_string()).collect()).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_bad_labels() {
        assert!(Dataset::new(vec![f32::NAN], 1, vec![0], vec!["a".into()]).is_err());
        assert!(Dataset::new(vec![1.0], 1, vec![1], vec!["a".into()]).is_err());
        assert!(Dataset::new(vec![1.0, 2.0], 1, vec![0], vec!["a".into()]).is_err());
    }

    #[test]
    fn split_sizes() {
        let d = toy(vec![0; 10], 1);
        let (a, b) = split(&d, 0.8, 1).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<usize> = (0..100).map(|i| if i < 70 { 0 } else if i < 95 { 1 } else { 2 }).collect();
        let d = toy(labels, 3);
        let (a, b) = split(&d, 0.8, 7).unwrap();
        assert_eq!(a.class_counts(), vec![56, 20, 4]);
        assert_eq!(b.class_counts(), vec![14, 5, 1]);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let d = toy((0..50).map(|i| i % 3).collect(), 3);
        let (a1, b1) = split(&d, 0.8, 3).unwrap();
        let (a2, b2) = split(&d, 0.8, 3).unwrap();
        assert_eq!((&a1, &b1), (&a2, &b2));
        let mut firsts: Vec<f32> = a1.features().iter().chain(b1.features()).copied().collect();
        firsts.sort_by(f32::total_cmp);
        let mut all = d.features().to_vec();
        all.sort_by(f32::total_cmp);
        assert_eq!(firsts, all);
    }

    #[test]
    fn singleton_class_stays_in_train() {
        let d = toy(vec![0, 0, 0, 0, 1], 2);
        let (a, b) = split(&d, 0.8, 1).unwrap();
        assert_eq!(a.class_counts()[1], 1);
        assert_eq!(b.class_counts()[1], 0);
    }

    #[test]
    fn split_rejects_bad_ratio() {
        let d = toy(vec![0; 4], 1);
        assert!(split(&d, 0.0, 1).is_err());
        assert!(split(&d, 1.0, 1).is_err());
    }

    #[test]
    fn normalization_schemes() {
        let d = Dataset::new(vec![1.0, 5.0, 3.0, 5.0, 5.0, 5.0], 2, vec![0, 0, 0], vec!["x".into()]).unwrap();
        let stats = FeatureStats::from_dataset(&d).unwrap();
        let mm = normalize(&d, &stats, Normalization::MinMax).unwrap();
        assert_eq!(mm.features(), &[0.0, 0.0, 0.5, 0.0, 1.0, 0.0]);
        let z = normalize(&d, &stats, Normalization::ZScore).unwrap();
        let col0: Vec<f32> = (0..3).map(|i| z.sample(i)[0]).collect();
        assert!(col0.iter().sum::<f32>().abs() < 1e-6);
        assert!((col0.iter().map(|x| x * x).sum::<f32>() / 3.0 - 1.0).abs() < 1e-6);
        assert!((0..3).all(|i| z.sample(i)[1] == 0.0));
    }

    #[test]
    fn eval_rows_may_leave_unit_interval() {
        let train = Dataset::new(vec![0.0, 10.0], 1, vec![0, 0], vec!["x".into()]).unwrap();
        let eval = Dataset::new(vec![-5.0, 20.0], 1, vec![0, 0], vec!["x".into()]).unwrap();
        let stats = FeatureStats::from_dataset(&train).unwrap();
        assert_eq!(normalize(&eval, &stats, Normalization::MinMax).unwrap().features(), &[-0.5, 2.0]);
    }

    #[test]
    fn prepare_holds_out_test_and_uses_train_stats() {
        let d = blobs(&BlobSpec { classes: 2, features: 3, per_class: 50, ..Default::default() }).unwrap();
        let s = prepare(&d, None, 4, Normalization::MinMax).unwrap();
        assert_eq!((s.train.len(), s.eval.len(), s.test.len()), (64, 16, 20));
        for j in 0..3 {
            let col: Vec<f32> = (0..s.train.len()).map(|i| s.train.sample(i)[j]).collect();
            assert_eq!(col.iter().copied().fold(f32::INFINITY, f32::min), 0.0);
            assert_eq!(col.iter().copied().fold(f32::NEG_INFINITY, f32::max), 1.0);
        }
        let again = prepare(&d, None, 4, Normalization::MinMax).unwrap();
        assert_eq!(s.test, again.test);
    }
}
