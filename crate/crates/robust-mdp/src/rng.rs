//! Deterministic seed-stream derivation.
//!
//! Every randomized operation takes its generator explicitly. Callers that
//! fan work out across threads derive one child stream per task from
//! `(seed, path)`, so results depend only on the seed and the task index,
//! never on scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 step; decorrelates nearby seeds.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a path of tags.
///
/// The derivation is associative-free: `child_seed(s, &[a, b])` differs
/// from `child_seed(s, &[b, a])` and from `child_seed(child_seed(s, &[a]), &[])`.
pub fn child_seed(base: u64, path: &[u64]) -> u64 {
    let mut acc = splitmix64(base ^ 0x6a09_e667_f3bc_c908);
    for &tag in path {
        acc = splitmix64(acc ^ splitmix64(tag));
    }
    acc
}

/// A generator for the stream identified by `(base, path)`.
pub fn stream_rng(base: u64, path: &[u64]) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(child_seed(base, path))
}
