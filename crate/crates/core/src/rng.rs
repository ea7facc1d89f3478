//! Seed derivation and sampling helpers shared by the Monte Carlo code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based stream seed: distinct `index` values map to distinct seeds
/// for a fixed `(master, stream)`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let base = mix64(master ^ mix64(stream.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    mix64(base.wrapping_add(index))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Uniform `k`-subset of `0..n` by partial Fisher-Yates, returned sorted.
///
/// `scratch` must hold a permutation of `0..n`; it is left permuted, which
/// keeps repeated draws unbiased without re-initializing.
pub fn sample_subset<R: Rng + ?Sized>(rng: &mut R, scratch: &mut [usize], k: usize) -> Vec<usize> {
    let n = scratch.len();
    assert!(k <= n, "subset size {k} exceeds population {n}");
    for i in 0..k {
        let j = rng.random_range(i..n);
        scratch.swap(i, j);
    }
    let mut out = scratch[..k].to_vec();
    out.sort_unstable();
    out
}

pub fn sample_subset_fresh<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut scratch: Vec<usize> = (0..n).collect();
    sample_subset(rng, &mut scratch, k)
}
