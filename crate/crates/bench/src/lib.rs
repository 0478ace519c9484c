//! Seeded inputs shared by the kernel benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use starlattice::spectral::random_band_limited;
use starlattice::{ComplexField, Grid};

/// Square grid of side `n` on a `2π` box.
pub fn square_grid(n: usize) -> Arc<Grid> {
    Grid::new(vec![n, n], vec![2.0 * PI, 2.0 * PI]).expect("valid grid")
}

/// Random field on the dealias band of `grid`.
pub fn dealiased_field(grid: &Arc<Grid>, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_band_limited(grid, &grid.dealias_band(), &mut rng)
}

/// Centred `sech` on a 1D grid of `n` points over `16π`.
pub fn sech_line(n: usize) -> ComplexField {
    let grid = Grid::line(n, 16.0 * PI).expect("valid grid");
    ComplexField::from_real_fn(&grid, |x| 1.0 / (x[0] - 8.0 * PI).cosh()).expect("finite")
}
