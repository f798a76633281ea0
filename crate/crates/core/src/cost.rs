//! Closed-form memory and compute requirements of a configuration.
//!
//! Memory is the number of bits a deployed model stores:
//!
//! * ID-level: `d * (f + l + c*q)` (ID vectors, level vectors, class vectors)
//! * projection: `d * q * (f + c)` (the matrix and the class vectors)
//!
//! Compute is counted in bit-operations per sample, where binding or bundling
//! a `w`-bit operand costs `w`:
//!
//! * encode: ID-level binds and bundles `f` vectors of `d` bits (`2*f*d`);
//!   projection multiplies-accumulates `f*d` elements of `q` bits (`f*d*q`)
//! * inference: one similarity against each of `c` class vectors (`c*d*q`)
//! * train: bundling one encoding into a class vector (`d*q`)
//!
//! Retraining epochs are not included in the training count.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EncoderKind, HdcConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub memory_bits: u64,
    pub encode_ops: u64,
    pub inference_ops: u64,
    pub train_ops: u64,
}

impl ResourceReport {
    pub fn of(config: &HdcConfig) -> Self {
        let (encode_ops, inference_ops, train_ops) = compute_ops(config);
        Self { memory_bits: memory_bits(config), encode_ops, inference_ops, train_ops }
    }

    pub fn total_ops(&self) -> u64 {
        self.encode_ops + self.inference_ops + self.train_ops
    }

    pub fn kib(&self) -> f64 {
        bits_to_kib(self.memory_bits)
    }

    pub fn kb(&self) -> f64 {
        bits_to_kb(self.memory_bits)
    }
}

impl fmt::Display for ResourceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "memory_bits={}", self.memory_bits)?;
        writeln!(f, "memory_kib={:.1}", self.kib())?;
        writeln!(f, "memory_kb={:.1}", self.kb())?;
        writeln!(f, "encode_ops={}", self.encode_ops)?;
        writeln!(f, "inference_ops={}", self.inference_ops)?;
        writeln!(f, "train_ops={}", self.train_ops)?;
        write!(f, "ops_unit=bit-ops (w-bit operand = w ops)")
    }
}

/// Bits to kibibytes (1024 bytes).
pub fn bits_to_kib(bits: u64) -> f64 {
    bits as f64 / 8.0 / 1024.0
}

/// Bits to kilobytes (1000 bytes).
pub fn bits_to_kb(bits: u64) -> f64 {
    bits as f64 / 8.0 / 1000.0
}

pub fn memory_bits(config: &HdcConfig) -> u64 {
    let (d, f, l, c, q) = widen(config);
    match config.encoder {
        EncoderKind::IdLevel => d * (f + l + c * q),
        EncoderKind::Projection => d * q * (f + c),
    }
}

/// Per-sample `(encode, inference, train)` bit-operation counts.
pub fn compute_ops(config: &HdcConfig) -> (u64, u64, u64) {
    let (d, f, _, c, q) = widen(config);
    let encode = match config.encoder {
        EncoderKind::IdLevel => 2 * f * d,
        EncoderKind::Projection => f * d * q,
    };
    (encode, c * d * q, d * q)
}

fn widen(config: &HdcConfig) -> (u64, u64, u64, u64, u64) {
    (
        config.dims as u64,
        config.features as u64,
        config.levels as u64,
        config.classes as u64,
        config.bitwidth as u64,
    )
}

/// How much cheaper `b` is than `a`. Ratios above 1 favour `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    pub memory_ratio: f64,
    pub compute_ratio: f64,
}

pub fn savings(a: &HdcConfig, b: &HdcConfig) -> Result<Savings> {
    if !a.same_workload(b) {
        return Err(Error::InvalidConfig(format!("cannot compare `{a}` (f={}, c={}) with `{b}` (f={}, c={})",
            a.features, a.classes, b.features, b.classes)));
    }
    let (ra, rb) = (ResourceReport::of(a), ResourceReport::of(b));
    Ok(Savings {
        memory_ratio: ra.memory_bits as f64 / rb.memory_bits as f64,
        compute_ratio: ra.total_ops() as f64 / rb.total_ops() as f64,
    })
}
