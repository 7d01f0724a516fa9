//! Zeros of the hyperbolic Gaussian analytic function `f(z) = Σ gₙ zⁿ`.
//!
//! Its zero set is the determinantal process of the disk Bergman kernel
//! `1/(π(1 - z w̄)²)`, so the expected number of zeros in an annulus is
//! `∫ 2r/(1 - r²)² dr`. Polynomials are truncated at degree `N - 1`; the
//! neglected tail `Σ_{n≥N} |z|^{2n}` is below 1e-9 for `N = 120`, `|z| ≤ 0.8`.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::c64;
use crate::rng::RngSeed;

/// Accepted residual, relative to the largest coefficient.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-8;

/// Largest analysis radius for intensity comparisons.
pub const MAX_RADIUS: f64 = 0.8;

/// Smallest truncation degree accepted by [`intensity_compare`].
pub const MIN_TERMS: usize = 60;

const ABERTH_MAX_ITER: usize = 500;
const NEWTON_POLISH_STEPS: usize = 3;

/// `N` i.i.d. standard complex Gaussians (real and imaginary parts `N(0, 1/2)`).
pub fn sample_gaf(n: usize, seed: RngSeed) -> Result<Vec<Complex64>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("GAF truncation {n} < 2")));
    }
    let mut rng = seed.rng();
    Ok(gaussian_coefficients(&mut rng, n))
}

fn gaussian_coefficients<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c64(re * s, im * s)
        })
        .collect()
}

/// Roots of `Σ cₖ zᵏ` (coefficients in increasing degree).
#[derive(Clone, Debug, PartialEq)]
pub struct Roots {
    pub roots: Vec<Complex64>,
    /// `|p(z)| / max(1, |z|)^n` per root, the residual of whichever of `p`
    /// or its reversal is evaluated inside the unit disk.
    pub residuals: Vec<f64>,
    pub max_coeff: f64,
    pub converged: bool,
}

impl Roots {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Every residual within `ROOT_RESIDUAL_TOL · max|cₖ|`.
    pub fn accepted(&self) -> bool {
        self.max_residual() <= ROOT_RESIDUAL_TOL * self.max_coeff
    }
}

/// `(p(z), p'(z))` by Horner.
fn horner(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = c64(0.0, 0.0);
    let mut dp = c64(0.0, 0.0);
    for &a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

/// Newton step `p(z)/p'(z)` and the scaled residual, evaluated through the
/// reversed polynomial outside the unit disk to avoid overflow.
fn newton_ratio(c: &[Complex64], z: Complex64) -> (Complex64, f64) {
    let n = (c.len() - 1) as f64;
    if z.norm() <= 1.0 {
        let (p, dp) = horner(c, z);
        (p / dp, p.norm())
    } else {
        let w = z.inv();
        let rev: Vec<Complex64> = c.iter().rev().copied().collect();
        let (q, dq) = horner(&rev, w);
        (z * q / (q * n - w * dq), q.norm())
    }
}

/// All roots by Aberth–Ehrlich simultaneous iteration, then Newton polish.
///
/// Trailing (highest-degree) coefficients below 1e-300 are trimmed. On
/// non-convergence the unpolished roots are returned with `converged =
/// false` and their residuals.
pub fn roots(coeffs: &[Complex64]) -> Result<Roots> {
    let mut c = coeffs.to_vec();
    while c.last().is_some_and(|a| a.norm() <= 1e-300) {
        c.pop();
    }
    if c.len() < 2 {
        return Err(Error::InvalidParameter("polynomial has no roots".into()));
    }
    let max_coeff = c.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let n = c.len() - 1;
    // zero roots factor out exactly
    let zeros = c.iter().take_while(|a| a.norm() == 0.0).count();
    let c = c[zeros..].to_vec();
    let d = c.len() - 1;
    let mut z: Vec<Complex64> = Vec::with_capacity(n);
    let mut converged = true;
    if d > 0 {
        let r0 = (c[0].norm() / c[d].norm()).powf(1.0 / d as f64);
        let mut cur: Vec<Complex64> = (0..d)
            .map(|k| Complex64::from_polar(r0, 0.4 + std::f64::consts::TAU * k as f64 / d as f64))
            .collect();
        let mut done = vec![false; d];
        let mut iter = 0;
        while done.iter().any(|&f| !f) {
            if iter == ABERTH_MAX_ITER {
                converged = false;
                break;
            }
            iter += 1;
            for k in 0..d {
                if done[k] {
                    continue;
                }
                let (ratio, _) = newton_ratio(&c, cur[k]);
                let repulsion: Complex64 = (0..d)
                    .filter(|&j| j != k)
                    .map(|j| (cur[k] - cur[j]).inv())
                    .sum();
                let step = ratio / (c64(1.0, 0.0) - ratio * repulsion);
                if !step.is_finite() {
                    done[k] = true;
                    continue;
                }
                cur[k] -= step;
                if step.norm() <= 4.0 * f64::EPSILON * cur[k].norm().max(1.0) {
                    done[k] = true;
                }
            }
        }
        for root in cur.iter_mut() {
            for _ in 0..NEWTON_POLISH_STEPS {
                let (ratio, res) = newton_ratio(&c, *root);
                let cand = *root - ratio;
                if ratio.is_finite() && newton_ratio(&c, cand).1 < res {
                    *root = cand;
                } else {
                    break;
                }
            }
        }
        z = cur;
    }
    z.extend(std::iter::repeat_n(c64(0.0, 0.0), zeros));
    let full = &coeffs[..=n];
    let residuals = z.iter().map(|&r| newton_ratio(full, r).1).collect();
    Ok(Roots {
        roots: z,
        residuals,
        max_coeff,
        converged,
    })
}

/// Expected number of zeros with `|z| < r`: `∫₀^r 2t/(1 - t²)² dt`, by
/// composite Simpson quadrature.
pub fn expected_count_below(r: f64) -> f64 {
    radial_integral(0.0, r)
}

/// Expected number of zeros with `lo ≤ |z| < hi`.
pub fn radial_integral(lo: f64, hi: f64) -> f64 {
    let f = |t: f64| 2.0 * t / (1.0 - t * t).powi(2);
    let n = 2000;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub expected: f64,
    pub observed_mean: f64,
    pub z_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityReport {
    pub terms: usize,
    pub radius: f64,
    pub trials: usize,
    /// Trials dropped because a root failed the residual bound.
    pub excluded: usize,
    pub seed: RngSeed,
    /// Counts per annulus `[r_i, r_{i+1})`.
    pub bins: Vec<IntensityBin>,
    /// Counts in the disks `|z| < r_{i+1}`.
    pub cumulative: Vec<IntensityBin>,
    pub pass: bool,
}

impl IntensityReport {
    pub fn max_abs_z(&self) -> f64 {
        self.bins.iter().map(|b| b.z_score.abs()).fold(0.0, f64::max)
    }

    /// Cumulative row ending at `r`, if `r` is a bin edge.
    pub fn disk(&self, r: f64) -> Option<&IntensityBin> {
        self.cumulative.iter().find(|b| (b.bin_hi - r).abs() < 1e-12)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for b in &self.bins {
            w.serialize(b).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(())
    }
}

fn bin_stat(lo: f64, hi: f64, counts: &[f64]) -> IntensityBin {
    let n = counts.len() as f64;
    let expected = radial_integral(lo, hi);
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = if var > 0.0 { var.sqrt() } else { expected.sqrt() };
    IntensityBin {
        bin_lo: lo,
        bin_hi: hi,
        expected,
        observed_mean: mean,
        z_score: if sd > 0.0 { (mean - expected) / (sd / n.sqrt()) } else { 0.0 },
    }
}

/// Zeros of one truncated GAF sample.
pub fn sample_zero_set(n: usize, seed: RngSeed) -> Result<Roots> {
    roots(&sample_gaf(n, seed)?)
}

/// Compare the radial histogram of GAF zeros in `|z| < radius` with the
/// Bergman intensity. Trial `i` uses `seed.split(i)`. PASS iff every bin has
/// `|z-score| ≤ 4` and under 1% of trials were excluded.
pub fn intensity_compare(n: usize, radius: f64, bins: usize, trials: usize, seed: RngSeed) -> Result<IntensityReport> {
    if n < MIN_TERMS {
        return Err(Error::InvalidParameter(format!("GAF truncation {n} < {MIN_TERMS}")));
    }
    if !(radius > 0.0 && radius <= MAX_RADIUS) {
        return Err(Error::InvalidParameter(format!("analysis radius {radius} outside (0, {MAX_RADIUS}]")));
    }
    if bins == 0 || trials < 2 {
        return Err(Error::InvalidParameter("need at least one bin and two trials".into()));
    }
    let width = radius / bins as f64;
    let histograms: Vec<Option<Vec<f64>>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let r = sample_zero_set(n, seed.split(i))?;
            if !r.accepted() {
                return Ok(None);
            }
            let mut h = vec![0.0; bins];
            for z in &r.roots {
                let a = z.norm();
                if a < radius {
                    h[((a / width) as usize).min(bins - 1)] += 1.0;
                }
            }
            Ok(Some(h))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<&Vec<f64>> = histograms.iter().flatten().collect();
    let excluded = trials - kept.len();
    if kept.len() < 2 {
        return Err(Error::InvalidParameter(format!("{excluded} of {trials} trials excluded")));
    }
    let edge = |i: usize| if i == bins { radius } else { i as f64 * width };
    let per_bin = |b: usize| kept.iter().map(|h| h[b]).collect::<Vec<f64>>();
    let below = |b: usize| kept.iter().map(|h| h[..=b].iter().sum()).collect::<Vec<f64>>();
    let bin_rows: Vec<IntensityBin> = (0..bins).map(|b| bin_stat(edge(b), edge(b + 1), &per_bin(b))).collect();
    let cumulative = (0..bins).map(|b| bin_stat(0.0, edge(b + 1), &below(b))).collect();
    let pass = bin_rows.iter().all(|b| b.z_score.abs() <= 4.0) && (excluded as f64) < 0.01 * trials as f64;
    Ok(IntensityReport {
        terms: n,
        radius,
        trials,
        excluded,
        seed,
        bins: bin_rows,
        cumulative,
        pass,
    })
}
