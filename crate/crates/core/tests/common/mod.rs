#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srmcf_core::{GridSpec, ScalarField3};

/// Random smooth π-periodic field: a few low-frequency cosine modes,
/// rescaled so that its sup norm is 1.
pub fn random_smooth_field(grid: &GridSpec, seed: u64) -> ScalarField3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lx = grid.x_extent();
    let ly = grid.y_extent();
    let modes: Vec<(f64, f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0..3) as f64,
                rng.gen_range(0..3) as f64,
                rng.gen_range(0..3) as f64,
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let f = ScalarField3::from_fn(grid, |x, y, t| {
        modes
            .iter()
            .map(|&(a, mx, my, mt, ph)| {
                a * (2.0 * PI * (mx * x / lx + my * y / ly) + 2.0 * mt * t + ph).cos()
            })
            .sum()
    });
    let s = f.max_abs();
    f.map(|v| v / s)
}
