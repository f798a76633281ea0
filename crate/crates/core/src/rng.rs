//! The single pseudo-random generator used across the crate.
//!
//! `HdRng` is ChaCha8 keyed by a 64-bit seed. ChaCha output is defined
//! bit-for-bit by its specification, so codebooks and splits are identical on
//! every platform. Independent consumers draw from separate ChaCha streams of
//! the same key, which lets a component be regenerated at a different size
//! without disturbing the others.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct HdRng(ChaCha8Rng);

impl HdRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Generator for stream `stream` of `seed`. Streams never overlap.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self(inner)
    }
}

impl RngCore for HdRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

const ID_STREAM: u64 = 1 << 32;
const LEVEL_STREAM: u64 = 2 << 32;
const PROJECTION_STREAM: u64 = 3 << 32;
const SPLIT_STREAM: u64 = 4 << 32;
const HOLDOUT_STREAM: u64 = 5 << 32;
const SHUFFLE_STREAM: u64 = 6 << 32;

/// Stream assignment for everything derived from one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Seeds(pub u64);

impl Seeds {
    pub fn master(self) -> u64 {
        self.0
    }

    /// ID hypervector of feature `feature`.
    pub fn id(self, feature: usize) -> HdRng {
        HdRng::stream(self.0, ID_STREAM | feature as u64)
    }

    pub fn levels(self) -> HdRng {
        HdRng::stream(self.0, LEVEL_STREAM)
    }

    /// Row `row` of a projection matrix.
    pub fn projection_row(self, row: usize) -> HdRng {
        HdRng::stream(self.0, PROJECTION_STREAM | row as u64)
    }

    pub fn split(self) -> HdRng {
        HdRng::stream(self.0, SPLIT_STREAM)
    }

    pub fn holdout(self) -> HdRng {
        HdRng::stream(self.0, HOLDOUT_STREAM)
    }

    pub fn shuffle(self, epoch: usize) -> HdRng {
        HdRng::stream(self.0, SHUFFLE_STREAM | epoch as u64)
    }
}
