//! Deterministic random number generation.
//!
//! Model files store seeds instead of basis matrices, so the exact mapping
//! from `(seed, stream_label)` to the generated stream is part of the file
//! format contract and must never change:
//!
//! * stream state: `s0 = mix64(seed + GOLDEN_GAMMA * (stream_label + 1))`,
//!   advanced as `s(n+1) = s(n) + GOLDEN_GAMMA`, output `mix64(s(n+1))`
//!   (the SplitMix64 counter construction);
//! * unit draws: `(x >> 11) * 2^-53`, giving doubles in `[0, 1)`;
//! * Gaussian draws: Box-Muller, two unit draws per sample, cosine branch
//!   only, scaled by sigma last.
//!
//! Library defaults (ziggurat samplers, platform generators) are avoided on
//! purpose: regenerating a basis from a stored seed must be bit-identical
//! everywhere.

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed for every random artifact in the crate.
///
/// Identical seeds plus identical parameters produce bitwise-identical
/// streams, bases, models, and tuner trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl std::fmt::Display for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Finalizer from SplitMix64; a bijection on `u64`.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based pseudo-random stream.
///
/// Distinct `stream_label`s on the same seed yield statistically independent
/// streams, which is how one seed fans out into basis coefficients, offsets,
/// dataset noise, and tuner proposals without correlation.
#[derive(Debug, Clone)]
pub struct StreamRng {
    state: u64,
}

/// Builds the deterministic generator for `(seed, stream_label)`.
pub fn make_rng(seed: Seed, stream_label: u32) -> StreamRng {
    let lane = GOLDEN_GAMMA.wrapping_mul(u64::from(stream_label).wrapping_add(1));
    StreamRng {
        state: mix64(seed.0.wrapping_add(lane)),
    }
}

/// Derives a child seed from a parent; used to give every tuner trial its
/// own reproducible basis seed.
pub fn derive_seed(parent: Seed, index: u64) -> Seed {
    Seed(mix64(
        parent.0 ^ GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1)),
    ))
}

impl StreamRng {
    /// Next raw 64-bit output.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Next double in `[0, 1)`, using the top 53 bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased-enough draw in `[0, n)` via the multiply-shift reduction.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParam(format!(
                "uniform interval [{lo}, {hi}) is empty or non-finite"
            )));
        }
        let v = lo + self.next_f64() * (hi - lo);
        // Rounding can land exactly on `hi`; fold that measure-zero case back.
        Ok(if v < hi { v } else { lo })
    }

    /// One sample from `N(0, sigma^2)` via the frozen Box-Muller mapping.
    ///
    /// Consumes exactly two unit draws. Scaling by sigma happens last, so a
    /// sigma=2 stream is exactly twice a sigma=1 stream fed the same
    /// uniforms.
    pub fn gaussian(&mut self, sigma: f64) -> Result<f64> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParam(format!(
                "gaussian sigma must be positive and finite, got {sigma}"
            )));
        }
        let radius = 1.0 - self.next_f64(); // (0, 1], keeps ln finite
        let angle = self.next_f64();
        Ok((-2.0 * radius.ln()).sqrt() * (std::f64::consts::TAU * angle).cos() * sigma)
    }

    /// Deterministic Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
