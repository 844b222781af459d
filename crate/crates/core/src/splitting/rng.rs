//! The seeded shuffle every randomized split is built on.
//!
//! The contract is fixed so that other implementations can reproduce splits
//! exactly:
//!
//! 1. Interactions are put in canonical order (see [`crate::checksum`]).
//! 2. A SplitMix64 generator is seeded with the 64-bit seed as its state.
//!    Each draw adds `0x9E3779B97F4A7C15` to the state and mixes it:
//!    `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
//!    `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z ^ (z >> 31)` (all
//!    wrapping).
//! 3. A uniform index below `bound` comes from the 128-bit product
//!    `x * bound`: its high word is the index, and draws whose low word is
//!    below `(2^64 - bound) % bound` are rejected and redrawn.
//! 4. Fisher–Yates runs from the last position down: for `i = n-1 .. 1`,
//!    swap `i` with `below(i + 1)`.
//!
//! User-stratified strategies walk users in canonical order and shuffle each
//! user's canonical sub-list with the same generator stream.

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `0..bound`. `bound` must be positive.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = self.next_u64() as u128 * bound as u128;
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }
}

pub fn shuffle<T>(xs: &mut [T], rng: &mut SplitMix64) {
    for i in (1..xs.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        xs.swap(i, j);
    }
}
