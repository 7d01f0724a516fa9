//! Dense complex linear algebra.
//!
//! Everything here works on [`ComplexMatrix`], a plain row-major buffer of
//! `Complex64`. Hermitian eigenproblems go through cyclic Jacobi, general
//! determinants and solves through partial-pivot LU. Determinants of
//! Hermitian positive matrices are taken as eigenvalue products so that
//! factors like `1 - λ` never suffer cancellation.

mod eig;
mod lu;
mod matrix;

pub use eig::{hermitian_eig, HermitianEig};
pub use lu::{det, solve, Lu};
pub use matrix::{c64, ComplexMatrix};

use crate::error::{Error, Result};

/// Slack allowed when checking that a spectrum sits inside `[0, 1]`.
pub const SPECTRUM_SLACK: f64 = 1e-9;

/// `det(I - K)` for a Hermitian contraction, as `∏(1 - λ_k)`.
pub fn fredholm_det_finite(k: &ComplexMatrix) -> Result<f64> {
    if k.rows() == 0 {
        return Ok(1.0);
    }
    fredholm_from_spectrum(&hermitian_eig(k)?.values)
}

/// `∏(1 - λ_k)` from an already computed spectrum.
pub fn fredholm_from_spectrum(values: &[f64]) -> Result<f64> {
    check_unit_spectrum(values)?;
    Ok(values.iter().map(|&l| 1.0 - l.clamp(0.0, 1.0)).product())
}

/// Determinant of a Hermitian matrix as the product of its eigenvalues.
pub fn hermitian_det(m: &ComplexMatrix) -> Result<f64> {
    match m.rows() {
        0 => Ok(1.0),
        1 => Ok(m[(0, 0)].re),
        2 => Ok(m[(0, 0)].re * m[(1, 1)].re - m[(0, 1)].norm_sqr()),
        _ => Ok(hermitian_eig(m)?.values.iter().product()),
    }
}

/// Clamp the spectrum of a Hermitian matrix into `[lo, hi]`, keeping the
/// eigenvectors. Inputs already in range come back untouched.
pub fn psd_clamp(m: &ComplexMatrix, lo: f64, hi: f64) -> Result<ComplexMatrix> {
    Ok(psd_clamp_report(m, lo, hi)?.0)
}

/// Like [`psd_clamp`], also returning the total eigenvalue mass moved.
pub fn psd_clamp_report(m: &ComplexMatrix, lo: f64, hi: f64) -> Result<(ComplexMatrix, f64)> {
    if lo > hi {
        return Err(Error::InvalidParameter(format!("clamp range [{lo}, {hi}]")));
    }
    if m.rows() == 0 {
        return Ok((m.clone(), 0.0));
    }
    let eig = hermitian_eig(m)?;
    let moved: f64 = eig
        .values
        .iter()
        .map(|&l| (l - l.clamp(lo, hi)).abs())
        .sum();
    if moved == 0.0 {
        return Ok((m.clone(), 0.0));
    }
    let clamped = eig.map_spectrum(|l| l.clamp(lo, hi));
    Ok((clamped, moved))
}

pub(crate) fn check_unit_spectrum(values: &[f64]) -> Result<()> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min < -SPECTRUM_SLACK || max > 1.0 + SPECTRUM_SLACK {
        return Err(Error::SpectrumOutOfRange { min, max });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_hermitian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fredholm_trivial_cases() {
        assert_eq!(fredholm_det_finite(&ComplexMatrix::zeros(3, 3)).unwrap(), 1.0);
        let half = ComplexMatrix::from_real_diag(&[0.5, 0.5]);
        assert!((fredholm_det_finite(&half).unwrap() - 0.25).abs() < 1e-15);
        let v = [c64(0.6, 0.0), c64(0.0, 0.8)];
        let proj = ComplexMatrix::from_fn(2, 2, |i, j| v[i] * v[j].conj());
        assert!(fredholm_det_finite(&proj).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fredholm_rejects_bad_spectrum() {
        let bad = ComplexMatrix::from_real_diag(&[0.5, 1.1]);
        assert!(matches!(
            fredholm_det_finite(&bad),
            Err(Error::SpectrumOutOfRange { .. })
        ));
    }

    #[test]
    fn fredholm_matches_log_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let h = random_hermitian(&mut rng, 6);
            let k = psd_clamp(&h, 0.0, 0.9).unwrap();
            let eig = hermitian_eig(&k).unwrap();
            let via_log = eig.values.iter().map(|l| (1.0 - l).ln()).sum::<f64>().exp();
            let direct = fredholm_det_finite(&k).unwrap();
            assert!((direct - via_log).abs() <= 1e-12 * via_log.abs().max(1e-300));
        }
    }

    #[test]
    fn clamp_in_range_is_bit_identical() {
        let m = ComplexMatrix::from_real_diag(&[0.2, 0.7]);
        let out = psd_clamp(&m, 0.0, 1.0).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn clamp_diag() {
        let m = ComplexMatrix::from_real_diag(&[-0.1, 1.2]);
        let out = psd_clamp(&m, 0.0, 1.0).unwrap();
        assert!(out.max_abs_diff(&ComplexMatrix::from_real_diag(&[0.0, 1.0])) < 1e-14);
    }

    #[test]
    fn clamp_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let h = random_hermitian(&mut rng, 7).scale(3.0);
            let once = psd_clamp(&h, 0.0, 1.0).unwrap();
            let twice = psd_clamp(&once, 0.0, 1.0).unwrap();
            assert!(once.max_abs_diff(&twice) < 1e-12);
        }
    }

    #[test]
    fn hermitian_det_agrees_with_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..7 {
            let h = random_hermitian(&mut rng, n);
            let a = hermitian_det(&h).unwrap();
            let b = det(&h).unwrap();
            assert!((a - b.re).abs() < 1e-10 * (1.0 + a.abs()), "n={n}: {a} vs {b}");
            assert!(b.im.abs() < 1e-10 * (1.0 + a.abs()));
        }
    }
}
