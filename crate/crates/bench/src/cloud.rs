//! Synthetic point clouds of constant expected density.

use std::f64::consts::PI;

use rand::Rng;
use swing_core::igraph::PointCloud;
use swing_core::rng::stream;
use swing_core::Result;

const CLOUD_TAG: u64 = 0x636c64;

/// Half-width `(πN/6)^{1/3}` of the cube holding `N` points: at that size
/// a unit ball around an interior point holds about one other point.
pub fn cube_half_width(n: usize) -> f64 {
    (PI * n as f64 / 6.0).cbrt()
}

/// `N` points uniform in `[-h, h]³`, `h = cube_half_width(N)`.
pub fn gen_synthetic_cloud(n: usize, seed: u64) -> Result<PointCloud> {
    let h = cube_half_width(n);
    let mut rng = stream(seed, &[CLOUD_TAG]);
    let points = (0..n)
        .map(|_| (0..3).map(|_| rng.random_range(-h..=h)).collect())
        .collect();
    PointCloud::new(points)
}
