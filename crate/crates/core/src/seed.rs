//! Deterministic seed derivation.
//!
//! Every component that consumes randomness (split shuffling, bootstrap
//! resamples, per-record generation, per-repetition holdouts) derives its own
//! seed from a master seed and a stream index. Work units are therefore
//! independent: they can run in any order, or in parallel, and still produce
//! output bit-identical to the sequential schedule.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; the standard 64-bit finalizer keeps nearby
/// (seed, stream) pairs statistically unrelated.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive an independent child seed from a master seed and a stream index.
pub fn derive(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(stream.wrapping_add(0x51ed_270b)))
}

/// Deterministic RNG for a derived stream.
pub fn rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, stream))
}
