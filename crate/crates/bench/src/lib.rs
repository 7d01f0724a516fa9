//! Fixtures shared by the benchmarks.

use bergman_dpp::discretize::{build_grid, kernel_matrix};
use bergman_dpp::random::random_contraction;
use bergman_dpp::{DomainSpec, DppKernel, RngSeed};

/// Disk quadrature kernel and the sites with `|z| < 0.3`.
pub fn disk_kernel(alpha: f64, resolution: usize) -> (DppKernel, Vec<usize>) {
    let grid = build_grid(DomainSpec::Disk { alpha }, resolution, 0.15).expect("valid grid");
    let b = grid.within_radius(0.3);
    (kernel_matrix(&grid, 1e-6).expect("kernel").kernel, b)
}

pub fn contraction(seed: u64, m: usize) -> DppKernel {
    DppKernel::new(random_contraction(&mut RngSeed::new(seed, 0).rng(), m, 0.05, 0.95)).expect("contraction")
}
