//! Initial data generators.

use std::f64::consts::PI;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::grid::{CellField, GridSpec};

/// Smooth two-bump benchmark profile
/// `2 exp(sin(2πx/L) + sin(2πy/L) - 2) + 2.2 exp(-sin(2πx/L) - sin(2πy/L) - 2) - 1`
/// sampled at cell centers.
pub fn init_benchmark(grid: GridSpec) -> CellField {
    let k = 2.0 * PI / grid.length();
    CellField::from_fn(grid, |x, y| benchmark_profile(k * x, k * y))
}

#[inline]
fn benchmark_profile(kx: f64, ky: f64) -> f64 {
    let s = kx.sin() + ky.sin();
    2.0 * (s - 2.0).exp() + 2.2 * (-s - 2.0).exp() - 1.0
}

/// Uniform deviate in the open interval `(0, 1)`: the top 53 bits of a
/// SplitMix64 output, shifted by half a unit.
#[inline]
pub fn open_unit(rng: &mut SplitMix64) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Near-uniform state `0.5 + 0.05 (2r - 1)` with `r ∈ (0, 1)`.
///
/// `r` comes from SplitMix64 seeded with `seed` (state = seed), one draw per
/// cell in storage order (`i` fastest, then `j`), converted with
/// [`open_unit`].
pub fn init_random(grid: GridSpec, seed: u64) -> CellField {
    let mut rng = SplitMix64::seed_from_u64(seed);
    CellField::from_index_fn(grid, |_, _| 0.5 + 0.05 * (2.0 * open_unit(&mut rng) - 1.0))
}
