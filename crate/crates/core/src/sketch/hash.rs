//! Seeded hashing. All sketch randomness is derived from a master seed and
//! structural indices through these functions.

use super::field;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive a child seed from a parent seed and a tag.
#[inline]
pub fn derive(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Nested subsampling depth of `index` under `key`: the number of trailing
/// zero bits of its hash, so depth >= l with probability 2^-l.
#[inline]
pub fn depth(key: u64, index: u64) -> u32 {
    mix64(key ^ mix64(index)).trailing_zeros()
}

/// Polynomial hash of degree `d` over the 61-bit prime field, giving a
/// `(d+1)`-wise independent family.
#[derive(Debug, Clone)]
pub struct PolyHash {
    coeffs: Vec<u64>,
}

impl PolyHash {
    pub fn new(seed: u64, degree: usize) -> Self {
        let coeffs = (0..=degree as u64)
            .map(|i| derive(seed, i) % field::P)
            .collect();
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: u64) -> u64 {
        let x = x % field::P;
        self.coeffs.iter().rev().fold(0, |acc, &c| field::add(field::mul(acc, x), c))
    }

    /// Hash into `[0, buckets)`.
    pub fn bucket(&self, x: u64, buckets: u64) -> u64 {
        self.eval(x) % buckets
    }
}
