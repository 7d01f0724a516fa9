//! Closed-form weighted Bergman kernels and independent series oracles.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::elliptic::{PeriodPair, Weierstrass, DEFAULT_TERMS};
use crate::error::{Error, Result};
use crate::numerics::c64;
use crate::rng::RngSeed;
use rand::Rng;

/// Which weighted Bergman space a kernel lives on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainSpec {
    /// Unit disk with weight `(1+α)(1-|z|²)^α`, `α > -1`.
    Disk { alpha: f64 },
    /// Annulus `ρ < |z| < 1`, unweighted.
    Annulus { rho: f64 },
    /// Unit polydisk in `C^d`, unweighted.
    Polydisk { d: usize },
    /// Unit ball in `C^d`, unweighted.
    Ball { d: usize },
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DomainSpec::Disk { alpha } if !(alpha > -1.0 && alpha.is_finite()) => Err(
                Error::InvalidParameter(format!("disk weight exponent {alpha} must exceed -1")),
            ),
            DomainSpec::Annulus { rho } if !(rho > 0.0 && rho < 1.0) => Err(
                Error::InvalidParameter(format!("annulus inner radius {rho} not in (0, 1)")),
            ),
            DomainSpec::Polydisk { d } | DomainSpec::Ball { d } if d == 0 => {
                Err(Error::InvalidParameter("dimension must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Complex dimension.
    pub fn dim(&self) -> usize {
        match *self {
            DomainSpec::Disk { .. } | DomainSpec::Annulus { .. } => 1,
            DomainSpec::Polydisk { d } | DomainSpec::Ball { d } => d,
        }
    }

    pub fn contains(&self, z: &Point) -> bool {
        if z.dim() != self.dim() || !z.is_finite() {
            return false;
        }
        match *self {
            DomainSpec::Disk { .. } => z.coords[0].norm() < 1.0,
            DomainSpec::Annulus { rho } => {
                let r = z.coords[0].norm();
                rho < r && r < 1.0
            }
            DomainSpec::Polydisk { .. } => z.coords.iter().all(|c| c.norm() < 1.0),
            DomainSpec::Ball { .. } => z.norm_sqr() < 1.0,
        }
    }

    fn check(&self, z: &Point) -> Result<()> {
        if self.contains(z) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(format!("{:?} for {:?}", z.coords, self)))
        }
    }
}

/// A point of `C^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<Complex64>,
}

impl Point {
    pub fn new(coords: Vec<Complex64>) -> Self {
        Self { coords }
    }

    pub fn scalar(z: Complex64) -> Self {
        Self { coords: vec![z] }
    }

    pub fn origin(d: usize) -> Self {
        Self {
            coords: vec![c64(0.0, 0.0); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `z · w̄ = Σ z_j conj(w_j)`.
    pub fn dot_conj(&self, w: &Point) -> Complex64 {
        self.coords.iter().zip(&w.coords).map(|(a, b)| a * b.conj()).sum()
    }

    fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Lebesgue volume of the unit ball of `C^d`, `π^d / d!`.
pub fn ball_volume(d: usize) -> f64 {
    (1..=d).fold(1.0, |v, k| v * PI / k as f64)
}

/// The weight `ω(z)` of the space.
pub fn weight(spec: &DomainSpec, z: &Point) -> Result<f64> {
    spec.validate()?;
    spec.check(z)?;
    Ok(match *spec {
        DomainSpec::Disk { alpha } => {
            let s = 1.0 - z.coords[0].norm_sqr();
            if alpha == 0.0 {
                1.0
            } else {
                (1.0 + alpha) * s.powf(alpha)
            }
        }
        _ => 1.0,
    })
}

/// Reusable kernel evaluator; holds the elliptic-function state for the
/// annulus so it is not rebuilt per entry.
#[derive(Clone, Debug)]
pub struct BergmanKernel {
    spec: DomainSpec,
    annulus: Option<AnnulusState>,
}

#[derive(Clone, Debug)]
struct AnnulusState {
    wp: Weierstrass,
    /// `η₁/(πi) - 1/(2 ln ρ)`.
    shift: Complex64,
}

impl BergmanKernel {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        spec.validate()?;
        let annulus = match spec {
            DomainSpec::Annulus { rho } => Some(AnnulusState::new(rho)?),
            _ => None,
        };
        Ok(Self { spec, annulus })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn eval(&self, z: &Point, w: &Point) -> Result<Complex64> {
        self.spec.check(z)?;
        self.spec.check(w)?;
        let one = c64(1.0, 0.0);
        Ok(match self.spec {
            DomainSpec::Disk { alpha } => {
                let base = one - z.coords[0] * w.coords[0].conj();
                1.0 / (PI * complex_pow(base, 2.0 + alpha))
            }
            DomainSpec::Annulus { .. } => {
                let st = self.annulus.as_ref().expect("annulus state");
                let t = z.coords[0] * w.coords[0].conj();
                (st.wp.wp(t.ln())? + st.shift) / (PI * t)
            }
            DomainSpec::Polydisk { .. } => z
                .coords
                .iter()
                .zip(&w.coords)
                .map(|(a, b)| {
                    let base = one - a * b.conj();
                    1.0 / (PI * base * base)
                })
                .product(),
            DomainSpec::Ball { d } => {
                let base = one - z.dot_conj(w);
                1.0 / (ball_volume(d) * base.powi(d as i32 + 1))
            }
        })
    }

    /// Annulus only: ℘ evaluated on a chosen branch `ln(z w̄) + 2πik`.
    pub fn annulus_on_branch(&self, z: Complex64, w: Complex64, k: i32) -> Result<Complex64> {
        let st = self.annulus.as_ref().ok_or_else(|| {
            Error::InvalidParameter("branch evaluation needs an annulus kernel".into())
        })?;
        let t = z * w.conj();
        let s = t.ln() + c64(0.0, 2.0 * PI * k as f64);
        Ok((st.wp.wp(s)? + st.shift) / (PI * t))
    }
}

impl AnnulusState {
    fn new(rho: f64) -> Result<Self> {
        // ℘ has half-periods πi and ln ρ, i.e. the lattice {2πi m + 2 ln ρ n}.
        let periods = PeriodPair::new(c64(0.0, 2.0 * PI), c64(2.0 * rho.ln(), 0.0))?;
        let wp = Weierstrass::new(periods, DEFAULT_TERMS)?;
        let eta1 = wp.eta1()?;
        let shift = eta1 / c64(0.0, PI) - 1.0 / (2.0 * rho.ln());
        Ok(Self { wp, shift })
    }
}

/// `K(z, w)` for the given space.
pub fn eval_kernel(spec: &DomainSpec, z: &Point, w: &Point) -> Result<Complex64> {
    BergmanKernel::new(*spec)?.eval(z, w)
}

/// Principal-branch complex power, exact for small integer exponents.
fn complex_pow(base: Complex64, exponent: f64) -> Complex64 {
    if exponent.fract() == 0.0 && exponent.abs() <= 16.0 {
        base.powi(exponent as i32)
    } else {
        (base.ln() * exponent).exp()
    }
}

/// Truncated Laurent series value with a bound on the neglected tail.
#[derive(Clone, Copy, Debug)]
pub struct SeriesValue {
    pub value: Complex64,
    pub tail_bound: f64,
}

/// Disagreement between two evaluations of `K(z, w)`, measured against the
/// Cauchy–Schwarz scale `√(K(z,z) K(w,w)) ≥ |K(z, w)|`.
///
/// The annulus kernel has zeros off the diagonal, where plain relative error
/// is meaningless.
pub fn kernel_relative_error(a: Complex64, b: Complex64, kzz: f64, kww: f64) -> f64 {
    (a - b).norm() / (kzz * kww).sqrt().max(b.norm())
}

/// Squared norm `c_n = ∫ |u|^{2n} dA(u)` of `u^n` on the annulus `ρ < |u| < 1`.
pub fn annulus_monomial_norm_sq(rho: f64, n: i64) -> f64 {
    if n == -1 {
        2.0 * PI * (1.0 / rho).ln()
    } else {
        let e = (2 * n + 2) as f64;
        2.0 * PI * (1.0 - rho.powf(e)) / e
    }
}

/// Annulus kernel as `Σ_{|n| ≤ N} (z w̄)^n / c_n` over the orthogonal
/// Laurent monomials, evaluated in an overflow-free arrangement.
pub fn annulus_laurent_oracle(rho: f64, z: Complex64, w: Complex64, n_max: usize) -> SeriesValue {
    let t = z * w.conj();
    let at = t.norm();
    let one = c64(1.0, 0.0);
    // n = -1
    let mut value = one / (t * annulus_monomial_norm_sq(rho, -1));
    // n = k - 1 >= 0:  t^{k-1} k / (π (1 - ρ^{2k}))
    let mut tp = one;
    for k in 1..=n_max + 1 {
        let c = k as f64 / (PI * (1.0 - rho.powi(2 * k as i32)));
        value += tp * c;
        tp *= t;
    }
    // n = -k - 1 <= -2:  (ρ²/t)^k k / (π (1 - ρ^{2k})) / t
    let r = c64(rho * rho, 0.0) / t;
    let mut rp = r;
    for k in 1..n_max {
        let c = k as f64 / (PI * (1.0 - rho.powi(2 * k as i32)));
        value += rp * c / t;
        rp *= r;
    }
    let tail = |x: f64, start: usize| -> f64 {
        if x >= 1.0 {
            return f64::INFINITY;
        }
        let s = start as f64;
        x.powf(s) * (s / (1.0 - x) + x / ((1.0 - x) * (1.0 - x)))
    };
    let denom = PI * (1.0 - rho * rho);
    let tail_bound =
        (tail(at, n_max + 2) / at + tail(rho * rho / at, n_max) / at) / denom;
    SeriesValue { value, tail_bound }
}

/// `‖z^n‖² = (1+α) π B(n+1, α+1)` in `A²(𝔻, ω_α)`.
pub fn disk_monomial_norm_sq(alpha: f64, n: usize) -> f64 {
    // B(n+1, α+1) = n! / ∏_{k=1}^{n+1} (α + k)
    let mut beta = 1.0 / (alpha + 1.0);
    for k in 1..=n {
        beta *= k as f64 / (alpha + 1.0 + k as f64);
    }
    (1.0 + alpha) * PI * beta
}

/// Rank-`N` truncation `Σ_{n<N} z^n w̄^n / ‖z^n‖²` of the weighted disk kernel.
pub fn disk_basis_kernel(alpha: f64, n_terms: usize, z: Complex64, w: Complex64) -> Complex64 {
    let t = z * w.conj();
    let mut tp = c64(1.0, 0.0);
    let mut sum = c64(0.0, 0.0);
    for n in 0..n_terms {
        sum += tp / disk_monomial_norm_sq(alpha, n);
        tp *= t;
    }
    sum
}

/// One annulus pair compared across the two representations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusPair {
    pub z: [f64; 2],
    pub w: [f64; 2],
    pub elliptic: [f64; 2],
    pub laurent: [f64; 2],
    pub laurent_terms: usize,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusCheck {
    pub rho: f64,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub pairs: Vec<AnnulusPair>,
    pub pass: bool,
}

/// Tolerance of the ℘-formula against the Laurent series.
pub const ANNULUS_TOLERANCE: f64 = 1e-8;

/// Laurent series lengthened until its tail is below 1e-12 of the
/// Cauchy–Schwarz scale `√(K(z,z) K(w,w))`.
fn converged_laurent(rho: f64, z: Complex64, w: Complex64) -> (SeriesValue, usize) {
    let mut n = 500;
    loop {
        let o = annulus_laurent_oracle(rho, z, w, n);
        let scale = (annulus_laurent_oracle(rho, z, z, n).value.re * annulus_laurent_oracle(rho, w, w, n).value.re)
            .sqrt();
        if o.tail_bound <= 1e-12 * scale || n >= 1 << 20 {
            return (o, n);
        }
        n *= 2;
    }
}

/// Compare the ℘-formula with the Laurent series at `pairs` random pairs,
/// each point area-uniform in the annulus `ρ < |z| < 1`.
pub fn annulus_cross_check(rho: f64, pairs: usize, seed: RngSeed) -> Result<AnnulusCheck> {
    let spec = DomainSpec::Annulus { rho };
    let kernel = BergmanKernel::new(spec)?;
    let mut rng = seed.rng();
    let mut draw = || {
        let r = rng.random_range(rho * rho..1.0f64).sqrt();
        Complex64::from_polar(r, rng.random_range(0.0..2.0 * PI))
    };
    let mut out = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let (z, w) = (draw(), draw());
        if !spec.contains(&Point::scalar(z)) || !spec.contains(&Point::scalar(w)) {
            continue;
        }
        let a = kernel.eval(&Point::scalar(z), &Point::scalar(w))?;
        let (o, terms) = converged_laurent(rho, z, w);
        let kzz = converged_laurent(rho, z, z).0.value.re;
        let kww = converged_laurent(rho, w, w).0.value.re;
        out.push(AnnulusPair {
            z: [z.re, z.im],
            w: [w.re, w.im],
            elliptic: [a.re, a.im],
            laurent: [o.value.re, o.value.im],
            laurent_terms: terms,
            relative_error: kernel_relative_error(a, o.value, kzz, kww),
        });
    }
    let max_relative_error = out.iter().map(|p| p.relative_error).fold(0.0, f64::max);
    Ok(AnnulusCheck {
        rho,
        max_relative_error,
        tolerance: ANNULUS_TOLERANCE,
        pass: out.len() == pairs && max_relative_error <= ANNULUS_TOLERANCE,
        pairs: out,
    })
}
