//! Binary model files.
//!
//! A file is a 64-byte header followed by a bit-packed payload. All integers
//! are little-endian.
//!
//! ```text
//! offset size field
//!      0    4 magic "MHD1"
//!      4    2 version (1)
//!      6    1 encoder (0 = id-level, 1 = projection)
//!      7    1 similarity (0 = cosine, 1 = dot)
//!      8    1 normalization (0 = none, 1 = minmax, 2 = zscore)
//!      9    1 q
//!     10    1 flags (bit 0: empty-class table follows the payload)
//!     11    1 reserved, zero
//!     12    4 f
//!     16    4 d
//!     20    4 l (0 for projection)
//!     24    4 c
//!     28    8 seed
//!     36    4 level interval low (f32)
//!     40    4 level interval high (f32)
//!     44    8 payload length in bits
//!     52    8 reserved, zero
//!     60    4 CRC-32 of bytes 0..60 and everything after the header
//! ```
//!
//! The payload is one LSB-first bitstream, padded with zeros to a whole byte:
//!
//! * ID-level: `f` ID vectors, then `l` level vectors (`d` bits each, bit set
//!   for +1), then `c` class vectors of `d` elements at `q` bits.
//! * projection: the `d x f` matrix row-major at `q` bits, then `c` class
//!   vectors of `d` elements at `q` bits.
//!
//! A `q`-bit element is stored in two's complement for `q >= 2`; at `q = 1`
//! it is a single bit, set for +1. The payload length therefore equals the
//! cost model's memory figure. A 1-bit model whose training data lacked some
//! class cannot express that class's zero vector in one bit per element, so
//! such files append a `ceil(c/8)`-byte bitmap of empty classes.

use std::fs;
use std::path::Path;

use crate::data::Normalization;
use crate::encoders::{Encoder, IdLevelCodebook, ProjectionMatrix};
use crate::error::{Error, Result};
use crate::hv::{word_count, BipolarHv, IntegerHv};
use crate::model::{EncoderKind, HdcConfig, Similarity, TrainedModel};

pub const MAGIC: &[u8; 4] = b"MHD1";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 64;

const FLAG_EMPTY_TABLE: u8 = 1;

struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    filled: u32,
    bits: u64,
}

impl BitWriter {
    fn with_capacity_bits(bits: u64) -> Self {
        Self { bytes: Vec::with_capacity(bits.div_ceil(8) as usize), acc: 0, filled: 0, bits: 0 }
    }

    /// Appends the low `n` bits of `value`, `n <= 32`.
    fn push(&mut self, value: u64, n: u32) {
        debug_assert!(n <= 32);
        let masked = value & ((1u64 << n) - 1);
        self.acc |= masked << self.filled;
        self.filled += n;
        self.bits += n as u64;
        while self.filled >= 8 {
            self.bytes.push(self.acc as u8);
            self.acc >>= 8;
            self.filled -= 8;
        }
    }

    fn push_hv(&mut self, hv: &BipolarHv) {
        let mut left = hv.dims();
        for &w in hv.words() {
            let take = left.min(64);
            let low = take.min(32);
            self.push(w, low as u32);
            if take > 32 {
                self.push(w >> 32, (take - 32) as u32);
            }
            left -= take;
        }
    }

    fn push_elements(&mut self, values: &[i32], bitwidth: u32) {
        for &v in values {
            if bitwidth == 1 {
                self.push(u64::from(v > 0), 1);
            } else {
                self.push(v as u32 as u64, bitwidth);
            }
        }
    }

    fn finish(mut self) -> (Vec<u8>, u64) {
        if self.filled > 0 {
            self.bytes.push(self.acc as u8);
        }
        (self.bytes, self.bits)
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    fn take(&mut self, n: u32) -> Result<u64> {
        let end = self.pos + n as u64;
        if end > self.bytes.len() as u64 * 8 {
            return Err(Error::ModelFormat("payload ends early".into()));
        }
        let mut out = 0u64;
        let mut got = 0u32;
        while got < n {
            let byte = self.bytes[(self.pos / 8) as usize] as u64;
            let offset = (self.pos % 8) as u32;
            let chunk = (8 - offset).min(n - got);
            out |= ((byte >> offset) & ((1 << chunk) - 1)) << got;
            got += chunk;
            self.pos += chunk as u64;
        }
        Ok(out)
    }

    fn take_hv(&mut self, dims: usize) -> Result<BipolarHv> {
        let mut words = Vec::with_capacity(word_count(dims));
        let mut left = dims;
        while left > 0 {
            let take = left.min(64);
            let low = take.min(32);
            let mut w = self.take(low as u32)?;
            if take > 32 {
                w |= self.take((take - 32) as u32)? << 32;
            }
            words.push(w);
            left -= take;
        }
        BipolarHv::from_words(dims, words)
    }

    fn take_elements(&mut self, n: usize, bitwidth: u32) -> Result<Vec<i32>> {
        (0..n)
            .map(|_| {
                let raw = self.take(bitwidth)?;
                Ok(if bitwidth == 1 {
                    if raw == 1 { 1 } else { -1 }
                } else {
                    // Sign-extend from `bitwidth` bits.
                    let shift = 64 - bitwidth;
                    ((raw << shift) as i64 >> shift) as i32
                })
            })
            .collect()
    }
}

fn similarity_code(s: Similarity) -> u8 {
    match s {
        Similarity::Cosine => 0,
        Similarity::Dot => 1,
    }
}

fn normalization_code(n: Normalization) -> u8 {
    match n {
        Normalization::None => 0,
        Normalization::MinMax => 1,
        Normalization::ZScore => 2,
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::ModelFormat(format!("{what} = {v} does not fit 32 bits")))
}

/// Serializes `model` to the layout described in the module docs.
pub fn to_bytes(model: &TrainedModel) -> Result<Vec<u8>> {
    let cfg = &model.config;
    cfg.validate()?;
    if model.class_hvs.len() != cfg.classes {
        return Err(Error::ModelFormat(format!("{} class vectors for c = {}", model.class_hvs.len(), cfg.classes)));
    }
    let q = cfg.bitwidth;
    let bits = crate::cost::memory_bits(cfg);
    let mut w = BitWriter::with_capacity_bits(bits);
    let (lo, hi) = match &model.encoder {
        Encoder::IdLevel(cb) => {
            if cb.levels().len() != cfg.levels || cb.features() != cfg.features || cb.dims() != cfg.dims {
                return Err(Error::ModelFormat("codebook shape does not match the configuration".into()));
            }
            for hv in cb.ids().iter().chain(cb.levels()) {
                w.push_hv(hv);
            }
            cb.bounds()
        }
        Encoder::Projection(p) => {
            if p.rows() != cfg.dims || p.cols() != cfg.features || p.bitwidth() != q {
                return Err(Error::ModelFormat("projection matrix shape does not match the configuration".into()));
            }
            w.push_elements(p.data(), q);
            (0.0, 0.0)
        }
    };
    let mut empty = vec![0u8; cfg.classes.div_ceil(8)];
    let mut any_empty = false;
    for (label, class) in model.class_hvs.iter().enumerate() {
        if class.dims() != cfg.dims || class.bitwidth() != q {
            return Err(Error::ModelFormat(format!("class {label} has the wrong shape")));
        }
        if q == 1 && class.is_zero() {
            empty[label / 8] |= 1 << (label % 8);
            any_empty = true;
        }
        w.push_elements(class.values(), q);
    }
    let (payload, written) = w.finish();
    debug_assert_eq!(written, bits);

    let mut out = Vec::with_capacity(HEADER_BYTES + payload.len() + empty.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match cfg.encoder {
        EncoderKind::IdLevel => 0,
        EncoderKind::Projection => 1,
    });
    out.push(similarity_code(model.similarity));
    out.push(normalization_code(model.normalization));
    out.push(q as u8);
    out.push(if any_empty { FLAG_EMPTY_TABLE } else { 0 });
    out.push(0);
    for v in [cfg.features, cfg.dims, cfg.levels, cfg.classes] {
        out.extend_from_slice(&to_u32(v, "header field")?.to_le_bytes());
    }
    out.extend_from_slice(&model.seed.to_le_bytes());
    out.extend_from_slice(&lo.to_le_bytes());
    out.extend_from_slice(&hi.to_le_bytes());
    out.extend_from_slice(&written.to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    debug_assert_eq!(out.len(), 60);
    out.extend_from_slice(&[0u8; 4]);
    out.extend_from_slice(&payload);
    if any_empty {
        out.extend_from_slice(&empty);
    }
    let crc = checksum(&out);
    out[60..64].copy_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn checksum(file: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(&file[..60]);
    h.update(&file[HEADER_BYTES..]);
    h.finalize()
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn le_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::ModelFormat(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let stored = le_u32(bytes, 60);
    let computed = checksum(bytes);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let encoder = match bytes[6] {
        0 => EncoderKind::IdLevel,
        1 => EncoderKind::Projection,
        other => return Err(Error::ModelFormat(format!("unknown encoder code {other}"))),
    };
    let similarity = match bytes[7] {
        0 => Similarity::Cosine,
        1 => Similarity::Dot,
        other => return Err(Error::ModelFormat(format!("unknown similarity code {other}"))),
    };
    let normalization = match bytes[8] {
        0 => Normalization::None,
        1 => Normalization::MinMax,
        2 => Normalization::ZScore,
        other => return Err(Error::ModelFormat(format!("unknown normalization code {other}"))),
    };
    let q = bytes[9] as u32;
    let flags = bytes[10];
    let config = HdcConfig {
        encoder,
        features: le_u32(bytes, 12) as usize,
        dims: le_u32(bytes, 16) as usize,
        levels: le_u32(bytes, 20) as usize,
        classes: le_u32(bytes, 24) as usize,
        bitwidth: q,
    };
    config.validate().map_err(|e| Error::ModelFormat(e.to_string()))?;
    let seed = le_u64(bytes, 28);
    let lo = f32::from_le_bytes(bytes[36..40].try_into().expect("4 bytes"));
    let hi = f32::from_le_bytes(bytes[40..44].try_into().expect("4 bytes"));
    let bits = le_u64(bytes, 44);
    let expected_bits = crate::cost::memory_bits(&config);
    if bits != expected_bits {
        return Err(Error::ModelFormat(format!("payload of {bits} bits, configuration implies {expected_bits}")));
    }
    let payload_bytes = bits.div_ceil(8) as usize;
    let table_bytes = if flags & FLAG_EMPTY_TABLE != 0 { config.classes.div_ceil(8) } else { 0 };
    if bytes.len() != HEADER_BYTES + payload_bytes + table_bytes {
        return Err(Error::ModelFormat(format!(
            "file is {} bytes, expected {}",
            bytes.len(),
            HEADER_BYTES + payload_bytes + table_bytes
        )));
    }

    let payload = &bytes[HEADER_BYTES..HEADER_BYTES + payload_bytes];
    let mut r = BitReader { bytes: payload, pos: 0 };
    let (d, f) = (config.dims, config.features);
    let enc = match encoder {
        EncoderKind::IdLevel => {
            let ids = (0..f).map(|_| r.take_hv(d)).collect::<Result<Vec<_>>>()?;
            let levels = (0..config.levels).map(|_| r.take_hv(d)).collect::<Result<Vec<_>>>()?;
            Encoder::IdLevel(IdLevelCodebook::from_parts(ids, levels, lo, hi)?)
        }
        EncoderKind::Projection => {
            let data = r.take_elements(d * f, q)?;
            Encoder::Projection(ProjectionMatrix::from_parts(d, f, q, data)?)
        }
    };
    let table = &bytes[HEADER_BYTES + payload_bytes..];
    let mut class_hvs = Vec::with_capacity(config.classes);
    for label in 0..config.classes {
        let values = r.take_elements(d, q)?;
        let empty = table.get(label / 8).is_some_and(|b| b & (1 << (label % 8)) != 0);
        class_hvs.push(if empty { IntegerHv::from_raw(vec![0; d], q) } else { IntegerHv::new(values, q)? });
    }
    Ok(TrainedModel { config, seed, encoder: enc, class_hvs, similarity, normalization })
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    from_bytes(&fs::read(path)?)
}
