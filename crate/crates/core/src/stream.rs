//! Deterministic random-stream derivation.
//!
//! Every stochastic quantity in the crate is a pure function of a `u64` seed
//! and integer stream indices, so repeated runs with the same configuration
//! produce identical bytes. ChaCha8 is used throughout: it is fast, has a
//! 64-bit stream parameter, and its output is stable across platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates nearby seeds before they reach ChaCha.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for `stream` under `seed`. Streams with distinct indices never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-trial noise stream.
pub fn trial_noise_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    stream_rng(seed, trial << 1)
}

/// Seed for the per-trial graph activation process.
pub fn trial_graph_seed(seed: u64, trial: u64) -> u64 {
    mix64(seed ^ mix64((trial << 1) | 1))
}
