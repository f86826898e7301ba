//! Seeded random function suites.
//!
//! The generator is SplitMix64 with its state initialized to the seed:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out = z ^ (z >> 31)
//! ```
//!
//! Each draw maps to `(out >> 11) · 2⁻⁵³ · 2 − 1 ∈ [−1, 1)`. Function `i`
//! of a suite takes the next `atoms` draws in ascending atom order.

use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::martingale::GridFunction;
use crate::space::MeasureSpace;

pub const DEFAULT_SUITE_SIZE: usize = 50;

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Uniform draw in `[-1, 1)`.
pub fn signed_unit(rng: &mut SplitMix64) -> f64 {
    ((rng.next_u64() >> 11) as f64) * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0
}

pub fn random_functions(space: &Arc<MeasureSpace>, count: usize, seed: u64) -> Vec<GridFunction> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let values = (0..space.len()).map(|_| signed_unit(&mut rng)).collect();
            GridFunction::new(space.clone(), values).expect("sized to the space")
        })
        .collect()
}
