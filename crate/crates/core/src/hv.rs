//! Hypervector representations and the primitive HDC operations.
//!
//! A [`BipolarHv`] stores one bit per element, `+1 -> 1` and `-1 -> 0`,
//! little-endian within 64-bit words. Bits past `dims` in the last word are
//! always zero, so equality, hashing and serialization can work on whole
//! words.
//!
//! An [`IntegerHv`] holds signed elements at a declared bitwidth `q`. For
//! `q >= 2` the range is the two's-complement range of `q` bits. A 1-bit
//! vector is bipolar: its elements are `-1` or `+1`, stored as bits 0 and 1.

use rand::RngCore;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

pub(crate) fn word_count(dims: usize) -> usize {
    dims.div_ceil(WORD_BITS)
}

pub(crate) fn tail_mask(dims: usize) -> u64 {
    match dims % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

/// Read access shared by both hypervector kinds.
pub trait Hypervector {
    fn dims(&self) -> usize;
    fn element(&self, index: usize) -> i32;

    fn squared_norm(&self) -> i64 {
        (0..self.dims()).map(|i| (self.element(i) as i64).pow(2)).sum()
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BipolarHv {
    dims: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for BipolarHv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BipolarHv(d={}, ", self.dims)?;
        for i in 0..self.dims.min(16) {
            f.write_str(if self.bit(i) { "+" } else { "-" })?;
        }
        if self.dims > 16 {
            f.write_str("...")?;
        }
        f.write_str(")")
    }
}

impl BipolarHv {
    /// Uniformly random vector: every element is `+1` or `-1` with
    /// probability 1/2.
    pub fn random<R: RngCore + ?Sized>(dims: usize, rng: &mut R) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidDimension);
        }
        let mut words: Vec<u64> = (0..word_count(dims)).map(|_| rng.next_u64()).collect();
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(dims);
        }
        Ok(Self { dims, words })
    }

    /// The all-`+1` vector.
    pub fn ones(dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidDimension);
        }
        let mut words = vec![u64::MAX; word_count(dims)];
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(dims);
        }
        Ok(Self { dims, words })
    }

    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::InvalidDimension);
        }
        let mut words = vec![0u64; word_count(signs.len())];
        for (i, &s) in signs.iter().enumerate() {
            match s {
                1 => words[i / WORD_BITS] |= 1 << (i % WORD_BITS),
                -1 => {}
                other => return Err(Error::OutOfRange { value: other as i64, bitwidth: 1 }),
            }
        }
        Ok(Self { dims: signs.len(), words })
    }

    /// Wraps packed words. Fails if the word count is wrong or padding bits
    /// are set.
    pub fn from_words(dims: usize, words: Vec<u64>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidDimension);
        }
        if words.len() != word_count(dims) {
            return Err(Error::DimensionMismatch { left: dims, right: words.len() * WORD_BITS });
        }
        if words[words.len() - 1] & !tail_mask(dims) != 0 {
            return Err(Error::InvalidConfig("padding bits set beyond hypervector length".into()));
        }
        Ok(Self { dims, words })
    }

    /// Elementwise sign of `values`, with `sign(0) = +1`.
    pub fn sign_of<T: Copy + PartialOrd + Default>(values: &[T]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDimension);
        }
        let zero = T::default();
        let mut words = vec![0u64; word_count(values.len())];
        for (i, &v) in values.iter().enumerate() {
            if v >= zero {
                words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
            }
        }
        Ok(Self { dims: values.len(), words })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn bit(&self, index: usize) -> bool {
        (self.words[index / WORD_BITS] >> (index % WORD_BITS)) & 1 == 1
    }

    /// Element at `index` as `+1` or `-1`.
    #[inline]
    pub fn get(&self, index: usize) -> i8 {
        if self.bit(index) { 1 } else { -1 }
    }

    pub fn to_signs(&self) -> Vec<i8> {
        (0..self.dims).map(|i| self.get(i)).collect()
    }

    pub(crate) fn flip(&mut self, index: usize) {
        self.words[index / WORD_BITS] ^= 1 << (index % WORD_BITS);
    }

    /// Elementwise product. Under the `+1 -> 1` encoding this is XNOR.
    pub fn bind(&self, other: &Self) -> Result<Self> {
        check_dims(self.dims, other.dims)?;
        let mut words: Vec<u64> = self.words.iter().zip(&other.words).map(|(a, b)| !(a ^ b)).collect();
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(self.dims);
        }
        Ok(Self { dims: self.dims, words })
    }

    pub fn negate(&self) -> Self {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(self.dims);
        }
        Self { dims: self.dims, words }
    }

    /// Cyclic shift: element `i` moves to `(i + k) mod d`. Negative shifts
    /// rotate the other way.
    pub fn permute(&self, k: i64) -> Self {
        let d = self.dims;
        let shift = k.rem_euclid(d as i64) as usize;
        if shift == 0 {
            return self.clone();
        }
        let mut out = vec![0u64; self.words.len()];
        for i in 0..d {
            if self.bit(i) {
                let j = (i + shift) % d;
                out[j / WORD_BITS] |= 1 << (j % WORD_BITS);
            }
        }
        Self { dims: d, words: out }
    }

    pub fn hamming(&self, other: &Self) -> Result<usize> {
        check_dims(self.dims, other.dims)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// `sum a[i] * b[i]`, computed as `d - 2 * hamming(a, b)`.
    pub fn dot(&self, other: &Self) -> Result<i64> {
        let h = self.hamming(other)?;
        Ok(self.dims as i64 - 2 * h as i64)
    }
}

impl Hypervector for BipolarHv {
    fn dims(&self) -> usize {
        self.dims
    }

    fn element(&self, index: usize) -> i32 {
        self.get(index) as i32
    }

    fn squared_norm(&self) -> i64 {
        self.dims as i64
    }
}

/// Inclusive element range of a `q`-bit integer hypervector. For `q = 1`
/// the admissible values are only the two endpoints.
pub fn bitwidth_range(bitwidth: u32) -> Result<(i64, i64)> {
    match bitwidth {
        1 => Ok((-1, 1)),
        2..=32 => Ok((-(1i64 << (bitwidth - 1)), (1i64 << (bitwidth - 1)) - 1)),
        q => Err(Error::InvalidBitwidth(q)),
    }
}

pub fn fits_bitwidth(value: i64, bitwidth: u32) -> bool {
    match bitwidth_range(bitwidth) {
        Ok(_) if bitwidth == 1 => value == 1 || value == -1,
        Ok((lo, hi)) => (lo..=hi).contains(&value),
        Err(_) => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntegerHv {
    bitwidth: u32,
    values: Vec<i32>,
}

impl IntegerHv {
    pub fn new(values: Vec<i32>, bitwidth: u32) -> Result<Self> {
        bitwidth_range(bitwidth)?;
        if values.is_empty() {
            return Err(Error::InvalidDimension);
        }
        if let Some(&bad) = values.iter().find(|&&v| !fits_bitwidth(v as i64, bitwidth)) {
            return Err(Error::OutOfRange { value: bad as i64, bitwidth });
        }
        Ok(Self { bitwidth, values })
    }

    /// All-zero vector. Zero is representable at every `q >= 2`; at `q = 1`
    /// it is the "empty class" marker and is the only non-bipolar value
    /// allowed.
    pub fn zeros(dims: usize, bitwidth: u32) -> Result<Self> {
        bitwidth_range(bitwidth)?;
        if dims == 0 {
            return Err(Error::InvalidDimension);
        }
        Ok(Self { bitwidth, values: vec![0; dims] })
    }

    pub(crate) fn from_raw(values: Vec<i32>, bitwidth: u32) -> Self {
        debug_assert!(values.iter().all(|&v| v == 0 || fits_bitwidth(v as i64, bitwidth)));
        Self { bitwidth, values }
    }

    pub fn from_bipolar(hv: &BipolarHv) -> Self {
        Self { bitwidth: 1, values: (0..hv.dims()).map(|i| hv.get(i) as i32).collect() }
    }

    /// Inverse of [`IntegerHv::from_bipolar`]; every element must be `+1` or
    /// `-1`.
    pub fn to_bipolar(&self) -> Result<BipolarHv> {
        let signs = self
            .values
            .iter()
            .map(|&v| match v {
                1 => Ok(1i8),
                -1 => Ok(-1i8),
                other => Err(Error::OutOfRange { value: other as i64, bitwidth: 1 }),
            })
            .collect::<Result<Vec<_>>>()?;
        BipolarHv::from_signs(&signs)
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn bitwidth(&self) -> u32 {
        self.bitwidth
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    pub fn norm(&self) -> f64 {
        (Hypervector::squared_norm(self) as f64).sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<i64> {
        check_dims(self.dims(), other.dims())?;
        Ok(self.values.iter().zip(&other.values).map(|(&a, &b)| a as i64 * b as i64).sum())
    }

    /// Dot product against a packed bipolar vector.
    pub fn dot_bipolar(&self, hv: &BipolarHv) -> Result<i64> {
        check_dims(self.dims(), hv.dims())?;
        let mut total = 0i64;
        for (word, chunk) in hv.words().iter().zip(self.values.chunks(WORD_BITS)) {
            let mut partial = 0i64;
            for (j, &v) in chunk.iter().enumerate() {
                let sign = (((word >> j) & 1) as i64) * 2 - 1;
                partial += sign * v as i64;
            }
            total += partial;
        }
        Ok(total)
    }
}

impl Hypervector for IntegerHv {
    fn dims(&self) -> usize {
        self.values.len()
    }

    fn element(&self, index: usize) -> i32 {
        self.values[index]
    }

    fn squared_norm(&self) -> i64 {
        self.values.iter().map(|&v| (v as i64).pow(2)).sum()
    }
}

/// `sum a[i] * b[i]` for any pair of hypervectors of equal length.
pub fn dot_similarity<A: Hypervector + ?Sized, B: Hypervector + ?Sized>(a: &A, b: &B) -> Result<i64> {
    check_dims(a.dims(), b.dims())?;
    Ok((0..a.dims()).map(|i| a.element(i) as i64 * b.element(i) as i64).sum())
}

pub fn cosine_similarity<A: Hypervector + ?Sized, B: Hypervector + ?Sized>(a: &A, b: &B) -> Result<f64> {
    let dot = dot_similarity(a, b)?;
    let (na, nb) = (a.squared_norm(), b.squared_norm());
    if na == 0 || nb == 0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot as f64 / ((na as f64).sqrt() * (nb as f64).sqrt())).clamp(-1.0, 1.0))
}

/// Bundling accumulator: 32-bit counters, overflow is an error.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Accumulator {
    counts: Vec<i32>,
}

impl Accumulator {
    pub fn new(dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidDimension);
        }
        Ok(Self { counts: vec![0; dims] })
    }

    pub fn from_counts(counts: Vec<i32>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidDimension);
        }
        Ok(Self { counts })
    }

    pub fn dims(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[i32] {
        &self.counts
    }

    pub fn into_counts(self) -> Vec<i32> {
        self.counts
    }

    /// `acc[i] += hv[i]`. On overflow the accumulator is left untouched.
    pub fn add(&mut self, hv: &BipolarHv) -> Result<()> {
        check_dims(self.counts.len(), hv.dims())?;
        let mut next = self.counts.clone();
        for (i, c) in next.iter_mut().enumerate() {
            *c = c.checked_add(hv.get(i) as i32).ok_or(Error::AccumulatorOverflow)?;
        }
        self.counts = next;
        Ok(())
    }

    /// Majority vector with `sign(0) = +1`.
    pub fn sign(&self) -> BipolarHv {
        BipolarHv::sign_of(&self.counts).expect("accumulator is non-empty")
    }
}

/// Bundles `hvs` and returns the elementwise sign of the sum.
pub fn bundle(hvs: &[BipolarHv]) -> Result<BipolarHv> {
    let first = hvs.first().ok_or(Error::InvalidDimension)?;
    let mut acc = Accumulator::new(first.dims())?;
    for hv in hvs {
        acc.add(hv)?;
    }
    Ok(acc.sign())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;
    use crate::rng::HdRng;
    use proptest::prelude::*;

    fn hv(signs: &[i8]) -> BipolarHv {
        BipolarHv::from_signs(signs).unwrap()
    }

    #[test]
    fn random_rejects_zero_dims() {
        assert!(matches!(BipolarHv::random(0, &mut HdRng::new(1)), Err(Error::InvalidDimension)));
    }

    #[test]
    fn random_single_element_is_bipolar() {
        for seed in 0..32 {
            let v = BipolarHv::random(1, &mut HdRng::new(seed)).unwrap();
            assert!(v.get(0) == 1 || v.get(0) == -1);
            assert_eq!(v.words()[0] & !1, 0);
        }
    }

    #[test]
    fn random_is_deterministic() {
        let a = BipolarHv::random(10_000, &mut HdRng::new(9)).unwrap();
        let b = BipolarHv::random(10_000, &mut HdRng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn padding_stays_zero() {
        let v = BipolarHv::random(70, &mut HdRng::new(3)).unwrap();
        assert_eq!(v.words()[1] >> 6, 0);
        assert_eq!(v.negate().words()[1] >> 6, 0);
        assert_eq!(v.bind(&v.negate()).unwrap().words()[1] >> 6, 0);
        assert!(BipolarHv::from_words(70, vec![0, 1 << 6]).is_err());
    }

    #[test]
    fn bind_hand_example() {
        assert_eq!(hv(&[1, -1]).bind(&hv(&[1, 1])).unwrap(), hv(&[1, -1]));
    }

    #[test]
    fn bind_self_is_ones() {
        let a = BipolarHv::random(130, &mut HdRng::new(5)).unwrap();
        assert_eq!(a.bind(&a).unwrap(), BipolarHv::ones(130).unwrap());
    }

    #[test]
    fn bind_rejects_mismatch() {
        let err = hv(&[1, 1]).bind(&hv(&[1, 1, 1])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { left: 2, right: 3 }));
    }

    #[test]
    fn bundle_hand_example() {
        let mut acc = Accumulator::new(2).unwrap();
        acc.add(&hv(&[1, -1])).unwrap();
        assert_eq!(acc.counts(), &[1, -1]);
    }

    #[test]
    fn bundle_same_vector_n_times() {
        let v = BipolarHv::random(100, &mut HdRng::new(11)).unwrap();
        let mut acc = Accumulator::new(100).unwrap();
        for _ in 0..7 {
            acc.add(&v).unwrap();
        }
        let expected: Vec<i32> = v.to_signs().iter().map(|&s| 7 * s as i32).collect();
        assert_eq!(acc.counts(), expected.as_slice());
    }

    #[test]
    fn accumulator_overflow_is_an_error() {
        let mut acc = Accumulator::from_counts(vec![i32::MAX, 0]).unwrap();
        let before = acc.clone();
        assert!(matches!(acc.add(&hv(&[1, 1])), Err(Error::AccumulatorOverflow)));
        assert_eq!(acc, before);
        let mut acc = Accumulator::from_counts(vec![i32::MIN]).unwrap();
        assert!(acc.add(&hv(&[-1])).is_err());
    }

    #[test]
    fn permute_examples() {
        let x = hv(&[1, -1, -1]);
        assert_eq!(x.permute(1), hv(&[-1, 1, -1]));
        assert_eq!(x.permute(0), x);
        assert_eq!(x.permute(3), x);
        assert_eq!(x.permute(-1), x.permute(2));
    }

    #[test]
    fn permute_moves_element_forward() {
        // [a, b, c] -> [c, a, b]
        let x = hv(&[1, -1, 1, 1, -1]);
        let p = x.permute(1);
        for i in 0..5 {
            assert_eq!(p.get((i + 1) % 5), x.get(i));
        }
    }

    #[test]
    fn dot_self_and_negation() {
        let v = BipolarHv::random(257, &mut HdRng::new(2)).unwrap();
        assert_eq!(v.dot(&v).unwrap(), 257);
        assert_eq!(v.dot(&v.negate()).unwrap(), -257);
    }

    #[test]
    fn bipolar_dot_matches_integer_path() {
        let mut rng = HdRng::new(77);
        for _ in 0..100 {
            let a = BipolarHv::random(256, &mut rng).unwrap();
            let b = BipolarHv::random(256, &mut rng).unwrap();
            let oracle: i64 = a.to_signs().iter().zip(b.to_signs()).map(|(&x, y)| x as i64 * y as i64).sum();
            assert_eq!(a.dot(&b).unwrap(), oracle);
            let (ia, ib) = (IntegerHv::from_bipolar(&a), IntegerHv::from_bipolar(&b));
            assert_eq!(ia.dot(&ib).unwrap(), oracle);
            assert_eq!(ia.dot_bipolar(&b).unwrap(), oracle);
            assert_eq!(dot_similarity(&a, &ib).unwrap(), oracle);
        }
    }

    #[test]
    fn cosine_examples() {
        let v = IntegerHv::new(vec![3, -2, 7, 0, 1], 8).unwrap();
        let neg = IntegerHv::new(v.values().iter().map(|x| -x).collect(), 8).unwrap();
        assert!((cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-9);
        assert!((cosine_similarity(&v, &neg).unwrap() + 1.0).abs() < 1e-9);
        let zero = IntegerHv::zeros(5, 8).unwrap();
        assert!(matches!(cosine_similarity(&v, &zero), Err(Error::ZeroNorm)));
    }

    #[test]
    fn cosine_matches_wide_float_oracle() {
        let mut rng = HdRng::new(123);
        for _ in 0..50 {
            let a: Vec<i32> = (0..300).map(|_| (rng.next_u32() % 65_536) as i32 - 32_768).collect();
            let b: Vec<i32> = (0..300).map(|_| (rng.next_u32() % 256) as i32 - 128).collect();
            let oracle = {
                let dot: f64 = a.iter().zip(&b).map(|(&x, &y)| x as f64 * y as f64).sum();
                let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
                dot / (na * nb)
            };
            let got = cosine_similarity(&IntegerHv::new(a, 16).unwrap(), &IntegerHv::new(b, 8).unwrap()).unwrap();
            assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
        }
    }

    #[test]
    fn integer_range_checks() {
        assert!(IntegerHv::new(vec![127, -128], 8).is_ok());
        assert!(IntegerHv::new(vec![128], 8).is_err());
        assert!(IntegerHv::new(vec![0], 1).is_err());
        assert!(IntegerHv::new(vec![1, -1], 1).is_ok());
        assert!(matches!(IntegerHv::new(vec![1], 0), Err(Error::InvalidBitwidth(0))));
        assert!(matches!(IntegerHv::new(vec![1], 33), Err(Error::InvalidBitwidth(33))));
        assert!(IntegerHv::new(vec![i32::MIN, i32::MAX], 32).is_ok());
    }

    #[test]
    fn one_bit_round_trip() {
        let v = BipolarHv::random(99, &mut HdRng::new(8)).unwrap();
        let i = IntegerHv::from_bipolar(&v);
        assert_eq!(i.bitwidth(), 1);
        assert_eq!(i.to_bipolar().unwrap(), v);
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(signs in proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 1..300)) {
            let v = BipolarHv::from_signs(&signs).unwrap();
            prop_assert_eq!(v.to_signs(), signs.clone());
            prop_assert_eq!(BipolarHv::from_words(v.dims(), v.words().to_vec()).unwrap(), v);
        }

        #[test]
        fn bind_algebra(seed in any::<u64>(), d in 1usize..400) {
            let mut rng = HdRng::new(seed);
            let a = BipolarHv::random(d, &mut rng).unwrap();
            let b = BipolarHv::random(d, &mut rng).unwrap();
            let c = BipolarHv::random(d, &mut rng).unwrap();
            prop_assert_eq!(a.bind(&b).unwrap(), b.bind(&a).unwrap());
            prop_assert_eq!(a.bind(&b).unwrap().bind(&c).unwrap(), a.bind(&b.bind(&c).unwrap()).unwrap());
            prop_assert_eq!(a.bind(&b).unwrap().bind(&b).unwrap(), a);
        }

        #[test]
        fn permute_cycles(seed in any::<u64>(), d in 1usize..300, k in -1000i64..1000) {
            let x = BipolarHv::random(d, &mut HdRng::new(seed)).unwrap();
            let p = x.permute(k);
            prop_assert_eq!(p.permute(d as i64 - k), x.clone());
            prop_assert_eq!(p.dot(&p).unwrap(), x.dot(&x).unwrap());
            prop_assert_eq!(p.to_signs().iter().filter(|&&s| s == 1).count(),
                            x.to_signs().iter().filter(|&&s| s == 1).count());
        }

        #[test]
        fn dot_is_d_minus_twice_hamming(seed in any::<u64>(), d in 1usize..500) {
            let mut rng = HdRng::new(seed);
            let a = BipolarHv::random(d, &mut rng).unwrap();
            let b = BipolarHv::random(d, &mut rng).unwrap();
            let oracle: i64 = (0..d).map(|i| a.get(i) as i64 * b.get(i) as i64).sum();
            prop_assert_eq!(a.dot(&b).unwrap(), oracle);
            prop_assert_eq!(oracle, d as i64 - 2 * a.hamming(&b).unwrap() as i64);
        }
    }
}
