//! Seeded random streams.
//!
//! Every stochastic routine takes a 64-bit seed and derives independent
//! substreams from `(seed, task)` so results do not depend on thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers that keep unrelated consumers of one seed apart.
pub mod purpose {
    pub const GRAPH: u64 = 0x01 << 40;
    pub const LOCAL_SEARCH: u64 = 0x02 << 40;
    pub const SUBSETS: u64 = 0x03 << 40;
    pub const SA_SAMPLER: u64 = 0x04 << 40;
    pub const CSP_TUPLES: u64 = 0x05 << 40;
    pub const CSP_SHIFTS: u64 = 0x06 << 40;
    pub const CSP_TRIALS: u64 = 0x07 << 40;
    pub const BALANCED: u64 = 0x08 << 40;
    pub const LASSERRE: u64 = 0x09 << 40;
    pub const AUDIT: u64 = 0x0a << 40;
    pub const CODES: u64 = 0x0b << 40;
}

/// Substream `task` of `seed`.
pub fn stream(seed: u64, task: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task);
    rng
}

/// First `k` positions of a partial Fisher-Yates shuffle of `0..n`.
///
/// Position `i` swaps with a uniform index in `i..n`; the draw order is part of
/// the reproducibility contract.
pub fn partial_fisher_yates(rng: &mut Rng, n: usize, k: usize) -> Vec<u32> {
    use rand::Rng as _;
    assert!(k <= n, "cannot draw {k} of {n} without replacement");
    let mut pool: Vec<u32> = (0..n as u32).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Uniform `k`-subset of `0..n`, sorted.
pub fn sorted_subset(rng: &mut Rng, n: usize, k: usize) -> Vec<u32> {
    let mut s = partial_fisher_yates(rng, n, k);
    s.sort_unstable();
    s
}
