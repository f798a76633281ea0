//! Encoders from `f` real-valued features into the `d`-dimensional space.
//!
//! * ID-level: every feature owns a random ID hypervector, every quantized
//!   feature value a level hypervector. A sample is the sign of the bundle of
//!   `bind(id_i, level(x_i))`.
//! * Projection: a `d x f` integer matrix at `q` bits multiplies the sample;
//!   the sign of the product is the encoding.
//!
//! Both produce bipolar encodings with `sign(0) = +1`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hv::{word_count, BipolarHv};
use crate::model::{EncoderKind, HdcConfig};
use crate::rng::{HdRng, Seeds};

/// Bits flipped between consecutive level hypervectors.
pub fn flips_per_level(dims: usize, levels: usize) -> usize {
    (dims / (2 * (levels - 1))).max(1)
}

/// Level index of `x` among `levels` equal-width bins over `[lo, hi]`.
/// Values outside the interval clamp to the first or last level.
pub fn discretize_feature(x: f32, lo: f32, hi: f32, levels: usize) -> usize {
    if hi <= lo || x.is_nan() {
        return 0;
    }
    let pos = ((x as f64 - lo as f64) / (hi as f64 - lo as f64) * levels as f64).floor();
    if pos <= 0.0 {
        0
    } else {
        (pos as usize).min(levels - 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdLevelCodebook {
    ids: Vec<BipolarHv>,
    levels: Vec<BipolarHv>,
    flips: usize,
    lo: f32,
    hi: f32,
}

impl IdLevelCodebook {
    /// Generates `features` ID hypervectors and a chain of `levels` level
    /// hypervectors at `dims` dimensions.
    ///
    /// Each ID hypervector comes from its own stream of `seeds`, so the
    /// first `d'` elements of a codebook built at `d > d'` equal the one built
    /// at `d'`. The level chain starts from a random vector and flips
    /// [`flips_per_level`] positions per step. Positions are taken from a
    /// random permutation of `0..d`, so no position is flipped twice until
    /// every position has been flipped once.
    pub fn generate(features: usize, dims: usize, levels: usize, seeds: Seeds) -> Result<Self> {
        if features == 0 {
            return Err(Error::InvalidConfig("feature count must be positive".into()));
        }
        if dims == 0 {
            return Err(Error::InvalidDimension);
        }
        if levels < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 levels, got {levels}")));
        }
        let ids = (0..features)
            .map(|i| BipolarHv::random(dims, &mut seeds.id(i)))
            .collect::<Result<Vec<_>>>()?;

        let flips = flips_per_level(dims, levels);
        let mut rng = seeds.levels();
        let mut current = BipolarHv::random(dims, &mut rng)?;
        let mut order: Vec<usize> = Vec::new();
        let mut chain = Vec::with_capacity(levels);
        chain.push(current.clone());
        for _ in 1..levels {
            let mut step: Vec<usize> = Vec::with_capacity(flips);
            while step.len() < flips {
                if order.is_empty() {
                    order = (0..dims).collect();
                    order.shuffle(&mut rng);
                }
                let pos = order.pop().expect("refilled above");
                // A refill mid-step may hand back a position already in this step.
                if !step.contains(&pos) {
                    step.push(pos);
                }
            }
            for &pos in &step {
                current.flip(pos);
            }
            chain.push(current.clone());
        }
        Ok(Self { ids, levels: chain, flips, lo: 0.0, hi: 1.0 })
    }

    /// Rebuilds a codebook from stored hypervectors.
    pub fn from_parts(ids: Vec<BipolarHv>, levels: Vec<BipolarHv>, lo: f32, hi: f32) -> Result<Self> {
        let dims = ids.first().ok_or_else(|| Error::InvalidConfig("codebook without ID vectors".into()))?.dims();
        if levels.len() < 2 {
            return Err(Error::InvalidConfig("codebook needs at least 2 levels".into()));
        }
        if let Some(bad) = ids.iter().chain(&levels).find(|hv| hv.dims() != dims) {
            return Err(Error::DimensionMismatch { left: dims, right: bad.dims() });
        }
        let flips = flips_per_level(dims, levels.len());
        Ok(Self { ids, levels, flips, lo, hi })
    }

    /// Sets the discretization interval. Defaults to `[0, 1]`, matching
    /// min-max normalized inputs.
    pub fn with_bounds(mut self, lo: f32, hi: f32) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }

    pub fn ids(&self) -> &[BipolarHv] {
        &self.ids
    }

    pub fn levels(&self) -> &[BipolarHv] {
        &self.levels
    }

    pub fn flips(&self) -> usize {
        self.flips
    }

    pub fn bounds(&self) -> (f32, f32) {
        (self.lo, self.hi)
    }

    pub fn dims(&self) -> usize {
        self.ids[0].dims()
    }

    pub fn features(&self) -> usize {
        self.ids.len()
    }

    pub fn level_of(&self, x: f32) -> usize {
        discretize_feature(x, self.lo, self.hi, self.levels.len())
    }

    /// Per-dimension count of features whose bound pair is `+1`.
    fn positive_counts(&self, sample: &[f32]) -> Result<Vec<u32>> {
        if sample.len() != self.ids.len() {
            return Err(Error::DimensionMismatch { left: self.ids.len(), right: sample.len() });
        }
        let d = self.dims();
        let mut counter = BitCounter::new(word_count(d), sample.len());
        for (id, &x) in self.ids.iter().zip(sample) {
            let level = &self.levels[self.level_of(x)];
            for (w, (a, b)) in id.words().iter().zip(level.words()).enumerate() {
                counter.add(w, !(a ^ b));
            }
        }
        Ok(counter.counts(d))
    }

    pub fn encode(&self, sample: &[f32]) -> Result<BipolarHv> {
        let f = sample.len() as u32;
        let counts = self.positive_counts(sample)?;
        // acc = 2 * positives - f; sign(0) = +1
        let signs: Vec<i64> = counts.iter().map(|&c| 2 * c as i64 - f as i64).collect();
        BipolarHv::sign_of(&signs)
    }

    /// The pre-sign bundle `sum_i bind(id_i, level(x_i))`.
    pub fn accumulate(&self, sample: &[f32]) -> Result<Vec<i64>> {
        let f = sample.len() as i64;
        Ok(self.positive_counts(sample)?.iter().map(|&c| 2 * c as i64 - f).collect())
    }
}

/// Column-wise population counter over packed words, stored as bit planes.
/// Adding a word costs one ripple-carry over the planes instead of 64
/// scalar increments.
struct BitCounter {
    planes: Vec<Vec<u64>>,
}

impl BitCounter {
    fn new(words: usize, max_count: usize) -> Self {
        let bits = (usize::BITS - max_count.leading_zeros()).max(1) as usize;
        Self { planes: vec![vec![0u64; words]; bits] }
    }

    #[inline]
    fn add(&mut self, word: usize, mut carry: u64) {
        for plane in &mut self.planes {
            if carry == 0 {
                break;
            }
            let slot = &mut plane[word];
            let next = *slot & carry;
            *slot ^= carry;
            carry = next;
        }
        debug_assert_eq!(carry, 0, "bit counter overflow");
    }

    fn counts(&self, dims: usize) -> Vec<u32> {
        (0..dims)
            .map(|i| {
                let (w, b) = (i / 64, i % 64);
                self.planes
                    .iter()
                    .enumerate()
                    .map(|(k, plane)| (((plane[w] >> b) & 1) as u32) << k)
                    .sum()
            })
            .collect()
    }
}

/// Row-major `rows x cols` matrix of `q`-bit signed integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectionMatrix {
    rows: usize,
    cols: usize,
    bitwidth: u32,
    data: Vec<i32>,
}

/// Discretizes a standard-normal draw to a `q`-bit integer: scale so that
/// three standard deviations reach the largest positive value, round, clamp.
/// At one bit the element is the sign of the draw.
pub fn quantize_gaussian(g: f64, bitwidth: u32) -> i32 {
    if bitwidth == 1 {
        return if g >= 0.0 { 1 } else { -1 };
    }
    let max = (1i64 << (bitwidth - 1)) - 1;
    let min = -(1i64 << (bitwidth - 1));
    let scaled = (g * max as f64 / 3.0).round();
    (scaled as i64).clamp(min, max) as i32
}

impl ProjectionMatrix {
    /// Draws a `dims x features` matrix. Row `r` comes from its own stream, so
    /// shrinking `dims` keeps the leading rows and changing `bitwidth`
    /// re-discretizes the same Gaussian draws.
    pub fn generate(features: usize, dims: usize, bitwidth: u32, seeds: Seeds) -> Result<Self> {
        if features == 0 {
            return Err(Error::InvalidConfig("feature count must be positive".into()));
        }
        if dims == 0 {
            return Err(Error::InvalidDimension);
        }
        if !(1..=16).contains(&bitwidth) {
            return Err(Error::InvalidBitwidth(bitwidth));
        }
        let mut data = Vec::with_capacity(dims * features);
        for r in 0..dims {
            let mut rng: HdRng = seeds.projection_row(r);
            data.extend((0..features).map(|_| quantize_gaussian(rng.sample::<f64, _>(StandardNormal), bitwidth)));
        }
        Ok(Self { rows: dims, cols: features, bitwidth, data })
    }

    pub fn from_parts(rows: usize, cols: usize, bitwidth: u32, data: Vec<i32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimension);
        }
        if !(1..=16).contains(&bitwidth) {
            return Err(Error::InvalidBitwidth(bitwidth));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { left: rows * cols, right: data.len() });
        }
        if let Some(&bad) = data.iter().find(|&&v| !crate::hv::fits_bitwidth(v as i64, bitwidth)) {
            return Err(Error::OutOfRange { value: bad as i64, bitwidth });
        }
        Ok(Self { rows, cols, bitwidth, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bitwidth(&self) -> u32 {
        self.bitwidth
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[i32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `P x`, accumulated in `f64` in column order.
    pub fn project(&self, sample: &[f32]) -> Result<Vec<f64>> {
        if sample.len() != self.cols {
            return Err(Error::DimensionMismatch { left: self.cols, right: sample.len() });
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(sample).map(|(&p, &x)| p as f64 * x as f64).sum())
            .collect())
    }

    pub fn encode(&self, sample: &[f32]) -> Result<BipolarHv> {
        BipolarHv::sign_of(&self.project(sample)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSample {
    pub hv: BipolarHv,
    /// Pre-sign values, when requested.
    pub preactivation: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Encoder {
    IdLevel(IdLevelCodebook),
    Projection(ProjectionMatrix),
}

impl Encoder {
    /// Materializes the encoder described by `config`.
    pub fn build(config: &HdcConfig, seeds: Seeds) -> Result<Self> {
        config.validate()?;
        Ok(match config.encoder {
            EncoderKind::IdLevel => {
                Encoder::IdLevel(IdLevelCodebook::generate(config.features, config.dims, config.levels, seeds)?)
            }
            EncoderKind::Projection => Encoder::Projection(ProjectionMatrix::generate(
                config.features,
                config.dims,
                config.bitwidth,
                seeds,
            )?),
        })
    }

    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::IdLevel(_) => EncoderKind::IdLevel,
            Encoder::Projection(_) => EncoderKind::Projection,
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            Encoder::IdLevel(cb) => cb.dims(),
            Encoder::Projection(p) => p.rows(),
        }
    }

    pub fn features(&self) -> usize {
        match self {
            Encoder::IdLevel(cb) => cb.features(),
            Encoder::Projection(p) => p.cols(),
        }
    }

    pub fn encode(&self, sample: &[f32]) -> Result<BipolarHv> {
        match self {
            Encoder::IdLevel(cb) => cb.encode(sample),
            Encoder::Projection(p) => p.encode(sample),
        }
    }

    pub fn encode_sample(&self, sample: &[f32], keep_preactivation: bool) -> Result<EncodedSample> {
        if !keep_preactivation {
            return Ok(EncodedSample { hv: self.encode(sample)?, preactivation: None });
        }
        let pre: Vec<f64> = match self {
            Encoder::IdLevel(cb) => cb.accumulate(sample)?.into_iter().map(|v| v as f64).collect(),
            Encoder::Projection(p) => p.project(sample)?,
        };
        Ok(EncodedSample { hv: BipolarHv::sign_of(&pre)?, preactivation: Some(pre) })
    }
}
