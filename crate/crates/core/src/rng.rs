//! Seeded randomness shared by every stochastic step (splits, subsampling,
//! probe initialization, mini-batch order, synthetic data).
//!
//! The generator is xoshiro256** whose 256-bit state is filled from a `u64`
//! seed by four successive SplitMix64 outputs. Two helpers on top of it are
//! part of the reproducibility contract and are kept deliberately simple so
//! other implementations can match them bit for bit:
//!
//! * [`uniform_index`] maps a draw `x` onto `[0, bound)` as
//!   `(x as u128 * bound as u128) >> 64` (multiply-shift, no rejection).
//! * [`shuffle`] is Fisher–Yates from the back: for `i` in `n-1 ..= 1`,
//!   `j = uniform_index(i + 1)`, swap `i` and `j`.
//! * [`uniform_f64`] takes the top 53 bits of a draw scaled by `2^-53`.
//!
//! Independent streams are derived with [`derive_seed`].

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
pub use rand_xoshiro::Xoshiro256StarStar as Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function applied to `z`.
pub fn mix64(z: u64) -> u64 {
    let mut z = z;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th independent stream below `seed`:
/// `mix64(seed + (index + 1) * GOLDEN_GAMMA)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn generator(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn uniform_index(rng: &mut Rng, bound: usize) -> usize {
    debug_assert!(bound > 0);
    ((rng.next_u64() as u128 * bound as u128) >> 64) as usize
}

pub fn uniform_f64(rng: &mut Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn shuffle<T>(rng: &mut Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = uniform_index(rng, i + 1);
        items.swap(i, j);
    }
}

/// `0..n` in the order produced by [`shuffle`] under `seed`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut generator(seed), &mut order);
    order
}
