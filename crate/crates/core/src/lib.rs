//! Determinantal point processes induced by weighted Bergman kernels.
//!
//! The crate discretizes the Bergman kernels of the weighted disk, the
//! annulus, the polydisk and the ball into finite Hermitian contractions and
//! works with the resulting determinantal point processes exactly:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`numerics`] | complex matrices, Jacobi eigensolver, LU, `det(I - K)` |
//! | [`elliptic`] | Weierstrass ℘, ζ and the quasi-period η₁ |
//! | [`kernels`] | closed-form Bergman kernels and their series oracles |
//! | [`discretize`] | quadrature grids and kernel matrices |
//! | [`dpp`] | correlations, gap probabilities, exact laws, sampling |
//! | [`palm`] | reduced Palm kernels (Schur and bordered-determinant routes) |
//! | [`conditional`] | conditional kernels and tolerance probes |
//! | [`coupling`] | monotone couplings by max-flow, domination checks |
//! | [`gaf`] | zeros of the hyperbolic Gaussian analytic function |
//!
//! Ground sets are small enough (a few hundred sites, up to 12 for exact
//! enumeration) that everything is dense.

pub mod conditional;
pub mod coupling;
pub mod discretize;
pub mod dpp;
pub mod elliptic;
mod error;
pub mod gaf;
pub mod kernels;
pub mod numerics;
pub mod palm;
pub mod random;
mod rng;

pub use conditional::{conditional_kernel, ProbeReport, TraceStats};
pub use coupling::{CouplingEntry, CouplingTable, DominationReport, TraceBoundReport};
pub use discretize::{DppKernel, Grid};
pub use dpp::{ConfigPmf, Configuration, Sampler};
pub use error::{Error, Result};
pub use gaf::{IntensityBin, IntensityReport, Roots};
pub use kernels::{DomainSpec, Point};
pub use numerics::{ComplexMatrix, HermitianEig};
pub use palm::PalmTuple;
pub use rng::RngSeed;

pub use num_complex::Complex64;

/// Crate version, recorded next to every experiment output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
