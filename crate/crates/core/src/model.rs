//! Class-hypervector model: single-pass training, retraining, quantization
//! and inference.
//!
//! Training keeps a full-precision *shadow* copy of every class hypervector.
//! Retraining updates the shadow; the deployed `q`-bit class vectors are
//! re-derived from it after each epoch, and only the deployed vectors are
//! used for prediction.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Normalization};
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::hv::{BipolarHv, IntegerHv};
use crate::rng::Seeds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    IdLevel,
    Projection,
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderKind::IdLevel => "id-level",
            EncoderKind::Projection => "projection",
        })
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id-level" | "idlevel" | "id_level" => Ok(EncoderKind::IdLevel),
            "projection" => Ok(EncoderKind::Projection),
            other => Err(Error::InvalidConfig(format!("unknown encoder `{other}`"))),
        }
    }
}

/// The tunable hyper-parameters `(d, l, q)` plus the workload constants
/// `f` and `c`. `levels` is meaningful only for ID-level encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HdcConfig {
    pub encoder: EncoderKind,
    #[serde(rename = "d")]
    pub dims: usize,
    #[serde(rename = "l")]
    pub levels: usize,
    #[serde(rename = "q")]
    pub bitwidth: u32,
    #[serde(rename = "f")]
    pub features: usize,
    #[serde(rename = "c")]
    pub classes: usize,
}

impl HdcConfig {
    pub fn id_level(features: usize, classes: usize, dims: usize, levels: usize, bitwidth: u32) -> Self {
        Self { encoder: EncoderKind::IdLevel, dims, levels, bitwidth, features, classes }
    }

    pub fn projection(features: usize, classes: usize, dims: usize, bitwidth: u32) -> Self {
        Self { encoder: EncoderKind::Projection, dims, levels: 0, bitwidth, features, classes }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::InvalidDimension);
        }
        if self.encoder == EncoderKind::IdLevel && self.levels < 2 {
            return Err(Error::InvalidConfig(format!("id-level encoding needs l >= 2, got {}", self.levels)));
        }
        if !(1..=16).contains(&self.bitwidth) {
            return Err(Error::InvalidBitwidth(self.bitwidth));
        }
        if self.features == 0 || self.classes == 0 {
            return Err(Error::InvalidConfig("feature and class counts must be positive".into()));
        }
        Ok(())
    }

    /// Same workload (encoder kind, `f`, `c`).
    pub fn same_workload(&self, other: &Self) -> bool {
        self.encoder == other.encoder && self.features == other.features && self.classes == other.classes
    }
}

impl fmt::Display for HdcConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.encoder {
            EncoderKind::IdLevel => write!(f, "id-level d={} l={} q={}", self.dims, self.levels, self.bitwidth),
            EncoderKind::Projection => write!(f, "projection d={} q={}", self.dims, self.bitwidth),
        }
    }
}

/// Class scoring function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Similarity {
    #[default]
    Cosine,
    Dot,
}

/// Retraining update rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// On a mistake, add `lr * h` to the true class and subtract it from the
    /// predicted one.
    #[default]
    Perceptron,
    /// As `Perceptron`, with each update scaled by `1 - cosine` between the
    /// encoding and the class being updated.
    SimilarityWeighted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub update: UpdateRule,
    pub similarity: Similarity,
    /// Reshuffle the sample order every epoch using this seed; dataset order
    /// otherwise.
    pub shuffle_seed: Option<u64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { epochs: 30, lr: 1.0, update: UpdateRule::Perceptron, similarity: Similarity::Cosine, shuffle_seed: None }
    }
}

/// Per-class symmetric linear quantization of a full-precision class vector.
///
/// The scale maps the largest magnitude onto `2^(q-1) - 1`. At `q = 1` the
/// result is the elementwise sign with `sign(0) = +1`. An all-zero input stays
/// all-zero at any `q`.
pub fn quantize_class_hv(shadow: &[f64], bitwidth: u32) -> Result<IntegerHv> {
    if !(1..=16).contains(&bitwidth) {
        return Err(Error::InvalidBitwidth(bitwidth));
    }
    if shadow.is_empty() {
        return Err(Error::InvalidDimension);
    }
    let max_abs = shadow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Ok(IntegerHv::from_raw(vec![0; shadow.len()], bitwidth));
    }
    if bitwidth == 1 {
        return Ok(IntegerHv::from_raw(shadow.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect(), 1));
    }
    let top = ((1i64 << (bitwidth - 1)) - 1) as f64;
    let scale = max_abs / top;
    let values = shadow.iter().map(|&v| (v / scale).round().clamp(-top, top) as i32).collect();
    Ok(IntegerHv::from_raw(values, bitwidth))
}

/// Quantization scale used by [`quantize_class_hv`] for `q >= 2`.
pub fn quantization_scale(shadow: &[f64], bitwidth: u32) -> f64 {
    let max_abs = shadow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    max_abs / ((1i64 << (bitwidth - 1)) - 1) as f64
}

pub fn quantize_class_hvs(shadow: &[Vec<f64>], bitwidth: u32) -> Result<Vec<IntegerHv>> {
    shadow.iter().map(|s| quantize_class_hv(s, bitwidth)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub config: HdcConfig,
    pub seed: u64,
    pub encoder: Encoder,
    pub class_hvs: Vec<IntegerHv>,
    pub similarity: Similarity,
    /// Input preprocessing the encoder expects. Recorded so a saved model can
    /// be evaluated on fresh data the same way.
    pub normalization: Normalization,
}

/// Precomputed norms for repeated scoring against fixed class vectors.
pub struct Scorer<'a> {
    class_hvs: &'a [IntegerHv],
    norms: Vec<f64>,
    similarity: Similarity,
}

impl<'a> Scorer<'a> {
    pub fn new(class_hvs: &'a [IntegerHv], similarity: Similarity) -> Result<Self> {
        let norms: Vec<f64> = class_hvs.iter().map(|c| c.norm()).collect();
        for (label, &n) in norms.iter().enumerate() {
            if n == 0.0 {
                log::warn!("class {label} has an all-zero hypervector; excluded from scoring");
            }
        }
        if norms.iter().all(|&n| n == 0.0) {
            return Err(Error::NoActiveClasses);
        }
        Ok(Self { class_hvs, norms, similarity })
    }

    /// Score of every class, `None` for excluded (all-zero) classes.
    pub fn scores(&self, hv: &BipolarHv) -> Result<Vec<Option<f64>>> {
        let sqrt_d = (hv.dims() as f64).sqrt();
        self.class_hvs
            .iter()
            .zip(&self.norms)
            .map(|(class, &norm)| {
                if norm == 0.0 {
                    return Ok(None);
                }
                let dot = class.dot_bipolar(hv)? as f64;
                Ok(Some(match self.similarity {
                    Similarity::Cosine => dot / (sqrt_d * norm),
                    Similarity::Dot => dot,
                }))
            })
            .collect()
    }

    /// Highest-scoring class; ties go to the lowest label.
    pub fn predict(&self, hv: &BipolarHv) -> Result<usize> {
        let scores = self.scores(hv)?;
        let mut best: Option<(usize, f64)> = None;
        for (label, score) in scores.into_iter().enumerate() {
            if let Some(s) = score {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((label, s));
                }
            }
        }
        best.map(|(label, _)| label).ok_or(Error::NoActiveClasses)
    }

    pub fn cosine(&self, label: usize, hv: &BipolarHv) -> Result<f64> {
        let norm = self.norms[label];
        if norm == 0.0 {
            return Ok(0.0);
        }
        Ok(self.class_hvs[label].dot_bipolar(hv)? as f64 / ((hv.dims() as f64).sqrt() * norm))
    }
}

impl TrainedModel {
    pub fn scorer(&self) -> Result<Scorer<'_>> {
        Scorer::new(&self.class_hvs, self.similarity)
    }

    pub fn predict(&self, sample: &[f32]) -> Result<usize> {
        let hv = self.encoder.encode(sample)?;
        self.scorer()?.predict(&hv)
    }

    pub fn predict_encoded(&self, hv: &BipolarHv) -> Result<usize> {
        self.scorer()?.predict(hv)
    }

    /// Fraction of `set` predicted correctly.
    pub fn evaluate(&self, set: &EncodedSet) -> Result<f64> {
        let correct = self.count_correct(set)?;
        Ok(correct as f64 / set.len() as f64)
    }

    pub fn count_correct(&self, set: &EncodedSet) -> Result<usize> {
        if set.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let scorer = self.scorer()?;
        let hits = set
            .hvs
            .par_iter()
            .zip(set.labels.par_iter())
            .map(|(hv, &y)| scorer.predict(hv).map(|p| usize::from(p == y)))
            .collect::<Result<Vec<_>>>()?;
        Ok(hits.into_iter().sum())
    }

    /// Encodes `data` and evaluates on it.
    pub fn evaluate_dataset(&self, data: &Dataset) -> Result<f64> {
        self.evaluate(&EncodedSet::encode(&self.encoder, data)?)
    }
}

/// A dataset after encoding, kept so repeated epochs do not re-encode.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSet {
    pub hvs: Vec<BipolarHv>,
    pub labels: Vec<usize>,
}

impl EncodedSet {
    pub fn encode(encoder: &Encoder, data: &Dataset) -> Result<Self> {
        if data.n_features() != encoder.features() {
            return Err(Error::DimensionMismatch { left: encoder.features(), right: data.n_features() });
        }
        let hvs = (0..data.len())
            .into_par_iter()
            .map(|i| encoder.encode(data.sample(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { hvs, labels: data.labels().to_vec() })
    }

    pub fn len(&self) -> usize {
        self.hvs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hvs.is_empty()
    }
}

/// A model under training: the deployed model plus its full-precision
/// shadow class vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingState {
    model: TrainedModel,
    shadow: Vec<Vec<f64>>,
}

impl TrainingState {
    /// Bundles every training encoding into its class and quantizes.
    pub fn single_pass(
        encoder: Encoder,
        config: HdcConfig,
        seed: u64,
        train: &EncodedSet,
        similarity: Similarity,
        normalization: Normalization,
    ) -> Result<Self> {
        config.validate()?;
        if encoder.dims() != config.dims || encoder.features() != config.features {
            return Err(Error::InvalidConfig("encoder shape does not match the configuration".into()));
        }
        if let Some(&bad) = train.labels.iter().find(|&&y| y >= config.classes) {
            return Err(Error::InvalidConfig(format!("label {bad} outside [0, {})", config.classes)));
        }
        let mut accs = vec![crate::hv::Accumulator::new(config.dims)?; config.classes];
        for (hv, &y) in train.hvs.iter().zip(&train.labels) {
            accs[y].add(hv)?;
        }
        let shadow: Vec<Vec<f64>> =
            accs.into_iter().map(|a| a.into_counts().into_iter().map(f64::from).collect()).collect();
        for (label, s) in shadow.iter().enumerate() {
            if s.iter().all(|&v| v == 0.0) {
                log::warn!("class {label} received no training samples; its hypervector stays zero");
            }
        }
        let class_hvs = quantize_class_hvs(&shadow, config.bitwidth)?;
        let model = TrainedModel { config, seed, encoder, class_hvs, similarity, normalization };
        Ok(Self { model, shadow })
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    pub fn into_model(self) -> TrainedModel {
        self.model
    }

    pub fn shadow(&self) -> &[Vec<f64>] {
        &self.shadow
    }

    /// Re-derives the deployed class vectors at a new bitwidth.
    pub fn requantize(&mut self, bitwidth: u32) -> Result<()> {
        self.model.class_hvs = quantize_class_hvs(&self.shadow, bitwidth)?;
        self.model.config.bitwidth = bitwidth;
        Ok(())
    }

    /// One pass over `train` in `order` (dataset order when `None`).
    /// Returns the number of mispredicted samples.
    pub fn retrain_epoch(&mut self, train: &EncodedSet, lr: f64, rule: UpdateRule, order: Option<&[usize]>) -> Result<usize> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        // Predictions use the deployed vectors, which are fixed for the epoch,
        // so they can be computed up front in parallel.
        let scorer = self.model.scorer()?;
        let predictions = train.hvs.par_iter().map(|hv| scorer.predict(hv)).collect::<Result<Vec<_>>>()?;
        let default_order: Vec<usize>;
        let order = match order {
            Some(o) => o,
            None => {
                default_order = (0..train.len()).collect();
                &default_order
            }
        };
        let mut mistakes = 0;
        for &i in order {
            let (hv, y, pred) = (&train.hvs[i], train.labels[i], predictions[i]);
            if pred == y {
                continue;
            }
            mistakes += 1;
            let (up, down) = match rule {
                UpdateRule::Perceptron => (lr, lr),
                UpdateRule::SimilarityWeighted => {
                    (lr * (1.0 - scorer.cosine(y, hv)?), lr * (1.0 - scorer.cosine(pred, hv)?))
                }
            };
            add_scaled(&mut self.shadow[y], hv, up);
            add_scaled(&mut self.shadow[pred], hv, -down);
        }
        if mistakes > 0 {
            self.model.class_hvs = quantize_class_hvs(&self.shadow, self.model.config.bitwidth)?;
        }
        Ok(mistakes)
    }

    /// Runs up to `opts.epochs` epochs. Stops early once an epoch makes no
    /// mistakes, since later epochs could not change the model.
    pub fn retrain(&mut self, train: &EncodedSet, opts: &TrainOptions) -> Result<()> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        for epoch in 0..opts.epochs {
            if let Some(seed) = opts.shuffle_seed {
                order.shuffle(&mut Seeds(seed).shuffle(epoch));
            }
            let mistakes = self.retrain_epoch(train, opts.lr, opts.update, Some(&order))?;
            log::debug!("epoch {epoch}: {mistakes} mistakes");
            if mistakes == 0 {
                break;
            }
        }
        Ok(())
    }
}

fn add_scaled(shadow: &mut [f64], hv: &BipolarHv, scale: f64) {
    for (i, s) in shadow.iter_mut().enumerate() {
        if hv.bit(i) {
            *s += scale;
        } else {
            *s -= scale;
        }
    }
}

/// Encodes `train`, bundles it, and retrains for `opts.epochs` epochs.
pub fn train(
    config: HdcConfig,
    seed: u64,
    train: &Dataset,
    opts: &TrainOptions,
    normalization: Normalization,
) -> Result<(TrainingState, EncodedSet)> {
    let encoder = Encoder::build(&config, Seeds(seed))?;
    let encoded = EncodedSet::encode(&encoder, train)?;
    let mut state = TrainingState::single_pass(encoder, config, seed, &encoded, opts.similarity, normalization)?;
    state.retrain(&encoded, opts)?;
    Ok((state, encoded))
}
