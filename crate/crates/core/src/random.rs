//! Random Hermitian instances for tests, probes and benchmarks.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::numerics::{c64, hermitian_eig, ComplexMatrix};

pub fn random_complex<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    random_complex(rng, n, n).symmetrize()
}

/// Random Hermitian matrix with eigenvalues drawn uniformly from `[lo, hi]`.
pub fn random_contraction<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> ComplexMatrix {
    let eig = hermitian_eig(&random_hermitian(rng, n)).unwrap();
    let vals: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    let u = &eig.vectors;
    ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| u[(i, k)] * u[(j, k)].conj() * vals[k]).sum::<Complex64>()
    })
    .symmetrize()
}

/// Random rank-`r` orthogonal projection in `C^n`.
pub fn random_projection<R: Rng>(rng: &mut R, n: usize, r: usize) -> ComplexMatrix {
    let eig = hermitian_eig(&random_hermitian(rng, n)).unwrap();
    let u = &eig.vectors;
    ComplexMatrix::from_fn(n, n, |i, j| {
        (n - r..n).map(|k| u[(i, k)] * u[(j, k)].conj()).sum::<Complex64>()
    })
    .symmetrize()
}
