//! Seed derivation and random streams.
//!
//! Every random quantity in a world or a run comes from a named stream. A
//! stream is a ChaCha8 generator (`rand_chacha`, 8 rounds, 64-bit block
//! counter) keyed by a 64-bit seed. Child seeds are derived from a parent seed
//! and a stream label with the SplitMix64 finalizer, so streams are
//! independent of the order in which they are created and of the number of
//! worker threads.
//!
//! Constants (SplitMix64, Steele et al.):
//! increment `0x9E37_79B9_7F4A_7C15`, multipliers `0xBF58_476D_1CE4_E5B9` and
//! `0x94D0_49BB_1331_11EB`, shifts 30 / 27 / 31.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Version tag of the stream layout. Bump when derivation changes.
pub const STREAM_VERSION: u32 = 1;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a stream label.
#[inline]
pub fn derive(parent: u64, label: u64) -> u64 {
    mix64(parent ^ mix64(label.wrapping_mul(GOLDEN)))
}

/// Stable 64-bit label for a stream name (FNV-1a).
pub fn label(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn stream(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn named(parent: u64, name: &str) -> Rng {
    stream(derive(parent, label(name)))
}

pub fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform draw in [0, 1) keyed by a tuple of integers; no state involved.
pub fn keyed_uniform(keys: &[u64]) -> f64 {
    let mut h = 0u64;
    for &k in keys {
        h = derive(h, k);
    }
    // 53 high bits -> [0, 1)
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
