//! Deterministic RNG stream derivation.
//!
//! Every random decision in the crate draws from a ChaCha stream derived from
//! a master seed plus a tag path, e.g. `stream(master, &[RUN, r, t])` for the
//! cascade of round `t` in run `r`. Streams are independent of execution
//! order, so experiment output is byte-reproducible regardless of how runs
//! are scheduled.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tag for the topology generator (random trees).
pub const TAG_GRAPH: u64 = 1;
/// Tag for drawing edge probabilities.
pub const TAG_WEIGHTS: u64 = 2;
/// Tag for feature-matrix generation.
pub const TAG_FEATURES: u64 = 3;
/// Tag for the one-time baseline oracle call and its spread estimate.
pub const TAG_BASELINE: u64 = 4;
/// Tag for per-(run, round) streams in the learning loop.
pub const TAG_ROUND: u64 = 5;
/// Tag for Monte-Carlo evaluations inside an oracle call.
pub const TAG_ORACLE_EVAL: u64 = 6;
/// Tag for sampled complexity-metric estimation.
pub const TAG_METRICS: u64 = 7;
/// Tag for randomized tie-breaking among exactly-equal oracle maxima.
pub const TAG_ORACLE_TIE: u64 = 8;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed and a tag path into a single 64-bit value.
pub fn mix(master: u64, tags: &[u64]) -> u64 {
    let mut state = master ^ 0x6a09_e667_f3bc_c908;
    let mut acc = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        acc ^= splitmix64(&mut state);
    }
    acc
}

/// Derive an independent ChaCha stream for `(master, tags)`.
pub fn stream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = mix(master, tags);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Stable hash of a sorted node set, for seeding per-candidate Monte-Carlo
/// evaluations inside oracle calls.
pub fn node_set_tag(nodes: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &v in nodes {
        h ^= v as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
