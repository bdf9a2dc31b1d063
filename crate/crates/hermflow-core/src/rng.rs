//! Deterministic seedable PRNG.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood; the same update used by
//! `java.util.SplittableRandom`). The algorithm is part of this crate's
//! compatibility contract: golden files and seeded test expectations depend on
//! the exact stream, so it must not change between releases.

/// SplitMix64 stream. One instance per logical draw site; never shared.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Derives an independent stream for a substream index, so that per-point
    /// draws do not depend on iteration order.
    pub fn derive(seed: u64, index: u64) -> Self {
        let mut root = Self::new(seed);
        let base = root.next_u64();
        Self::new(base ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [-1, 1].
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}
