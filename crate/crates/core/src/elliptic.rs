//! Weierstrass elliptic functions ℘ and ζ.
//!
//! Evaluation goes through a Gauss-reduced basis of half-periods
//! `(ω₁, ω₂)` with `τ = ω₂/ω₁` in the fundamental domain, so the nome
//! `q = e^{iπτ}` satisfies `|q| ≤ e^{-π√3/2} ≈ 0.066`. Arguments are first
//! reduced to the fundamental cell; for ζ the quasi-periods are added back.
//!
//! With `v = πu/(2ω₁)`:
//!
//! ```text
//! ℘(u) = -η₁/ω₁ + (π/2ω₁)² Σ_{n∈ℤ} csc²(v - nπτ)
//! ζ(u) =  η₁u/ω₁ + (π/2ω₁) [cot v + Σ_{n≥1} (cot(v - nπτ) + cot(v + nπτ))]
//! η₁   = (π²/12ω₁) (1 - 24 Σ_{n≥1} n q^{2n} / (1 - q^{2n}))
//! ```
//!
//! Each row of the lattice sum decays like `|q|^{2n}`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::c64;

/// Smallest admissible series cap.
pub const MIN_TERMS: usize = 20;
/// Default series cap; far more than the reduced nome ever needs.
pub const DEFAULT_TERMS: usize = 40;

const I: Complex64 = c64(0.0, 1.0);

/// A pair of full periods generating the lattice `{m P1 + n P2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodPair {
    pub p1: Complex64,
    pub p2: Complex64,
}

impl PeriodPair {
    pub fn new(p1: Complex64, p2: Complex64) -> Result<Self> {
        if p1.norm() == 0.0 || p2.norm() == 0.0 {
            return Err(Error::InvalidPeriods("zero period".into()));
        }
        let ratio = p2 / p1;
        if ratio.im.abs() <= 1e-12 * ratio.norm() {
            return Err(Error::InvalidPeriods(format!(
                "periods {p1} and {p2} are collinear"
            )));
        }
        Ok(Self { p1, p2 })
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            p1: self.p1 * s,
            p2: self.p2 * s,
        }
    }
}

/// Precomputed state for evaluating ℘ and ζ on one lattice.
#[derive(Clone, Debug)]
pub struct Weierstrass {
    periods: PeriodPair,
    /// Reduced half-periods.
    w1: Complex64,
    w2: Complex64,
    tau: Complex64,
    q: Complex64,
    /// `ζ(w1)`, `ζ(w2)` for the reduced basis.
    eta_w1: Complex64,
    eta_w2: Complex64,
    terms: usize,
}

impl Weierstrass {
    pub fn new(periods: PeriodPair, terms: usize) -> Result<Self> {
        if terms < MIN_TERMS {
            return Err(Error::InvalidParameter(format!(
                "series cap {terms} below minimum {MIN_TERMS}"
            )));
        }
        let periods = PeriodPair::new(periods.p1, periods.p2)?;
        let (w1, w2) = reduce_basis(periods.p1 * 0.5, periods.p2 * 0.5);
        let tau = w2 / w1;
        let q = (I * PI * tau).exp();
        let mut wp = Self {
            periods,
            w1,
            w2,
            tau,
            q,
            eta_w1: c64(0.0, 0.0),
            eta_w2: c64(0.0, 0.0),
            terms,
        };
        wp.eta_w1 = wp.eta_series();
        wp.eta_w2 = wp.zeta_cell(w2);
        Ok(wp)
    }

    pub fn periods(&self) -> PeriodPair {
        self.periods
    }

    /// ℘(u).
    pub fn wp(&self, u: Complex64) -> Result<Complex64> {
        let (u0, _, _) = self.reduce(u)?;
        let k = PI / (2.0 * self.w1);
        let v = k * u0;
        let sum = self.row_sum(v, csc2, csc2);
        Ok(-self.eta_w1 / self.w1 + k * k * sum)
    }

    /// ℘′(u).
    pub fn wp_prime(&self, u: Complex64) -> Result<Complex64> {
        let (u0, _, _) = self.reduce(u)?;
        let k = PI / (2.0 * self.w1);
        let v = k * u0;
        let term = |x: Complex64| csc2(x) * cot(x);
        let sum = self.row_sum(v, term, term);
        Ok(-2.0 * k * k * k * sum)
    }

    /// ζ(u).
    pub fn zeta(&self, u: Complex64) -> Result<Complex64> {
        let (u0, m, n) = self.reduce(u)?;
        Ok(self.zeta_cell(u0) + 2.0 * m * self.eta_w1 + 2.0 * n * self.eta_w2)
    }

    /// The half-increment `η₁ = ζ(P1/2)`, so that `ζ(u + P1) = ζ(u) + 2η₁`.
    pub fn eta1(&self) -> Result<Complex64> {
        self.zeta(self.periods.p1 * 0.5)
    }

    /// `η₂ = ζ(P2/2)`.
    pub fn eta2(&self) -> Result<Complex64> {
        self.zeta(self.periods.p2 * 0.5)
    }

    /// Lattice invariants `(g₂, g₃)` from the Eisenstein series in `q²`.
    pub fn invariants(&self) -> (Complex64, Complex64) {
        let k = PI / (2.0 * self.w1);
        let q2 = self.q * self.q;
        let mut e4 = c64(1.0, 0.0);
        let mut e6 = c64(1.0, 0.0);
        let mut qn = c64(1.0, 0.0);
        for n in 1..=self.terms {
            qn *= q2;
            let nf = n as f64;
            let denom = c64(1.0, 0.0) - qn;
            let t4 = qn * nf.powi(3) / denom;
            let t6 = qn * nf.powi(5) / denom;
            e4 += 240.0 * t4;
            e6 -= 504.0 * t6;
            if t6.norm() < 1e-17 {
                break;
            }
        }
        let k2 = k * k;
        let g2 = 4.0 / 3.0 * k2 * k2 * e4;
        let g3 = 8.0 / 27.0 * k2 * k2 * k2 * e6;
        (g2, g3)
    }

    fn eta_series(&self) -> Complex64 {
        let q2 = self.q * self.q;
        let mut e2 = c64(1.0, 0.0);
        let mut qn = c64(1.0, 0.0);
        for n in 1..=self.terms {
            qn *= q2;
            let t = qn * n as f64 / (c64(1.0, 0.0) - qn);
            e2 -= 24.0 * t;
            if t.norm() < 1e-18 {
                break;
            }
        }
        PI * PI / (12.0 * self.w1) * e2
    }

    /// ζ on an already reduced argument.
    fn zeta_cell(&self, u0: Complex64) -> Complex64 {
        let k = PI / (2.0 * self.w1);
        let v = k * u0;
        let mut s = cot(v);
        let step = PI * self.tau;
        for n in 1..=self.terms {
            let nf = n as f64;
            let t = cot(v - step * nf) + cot(v + step * nf);
            s += t;
            if t.norm() <= 1e-17 * s.norm() {
                break;
            }
        }
        self.eta_w1 * u0 / self.w1 + k * s
    }

    /// `f(v) + Σ_{n≥1} (f(v - nπτ) + g(v + nπτ))`, truncated at relative
    /// size 1e-17 or at the series cap.
    fn row_sum(
        &self,
        v: Complex64,
        f: impl Fn(Complex64) -> Complex64,
        g: impl Fn(Complex64) -> Complex64,
    ) -> Complex64 {
        let mut s = f(v);
        let step = PI * self.tau;
        for n in 1..=self.terms {
            let nf = n as f64;
            let t = f(v - step * nf) + g(v + step * nf);
            s += t;
            if t.norm() <= 1e-17 * s.norm() {
                break;
            }
        }
        s
    }

    /// Write `u = u0 + 2m ω₁ + 2n ω₂` with `u0` in the centered cell.
    fn reduce(&self, u: Complex64) -> Result<(Complex64, f64, f64)> {
        if !(u.re.is_finite() && u.im.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite argument {u}")));
        }
        let a = 2.0 * self.w1;
        let b = 2.0 * self.w2;
        // Solve u = x a + y b for real x, y.
        let det = a.re * b.im - a.im * b.re;
        let x = (u.re * b.im - u.im * b.re) / det;
        let y = (a.re * u.im - a.im * u.re) / det;
        let m = x.round();
        let n = y.round();
        let u0 = u - a * m - b * n;
        if u0.norm() <= 1e-12 * self.w1.norm() {
            return Err(Error::LatticePole(format!("{u}")));
        }
        Ok((u0, m, n))
    }
}

/// Gauss reduction of a lattice basis: returns `(w1, w2)` with
/// `|w1| ≤ |w2|`, `|Re(w2/w1)| ≤ 1/2` and `Im(w2/w1) > 0`.
fn reduce_basis(mut a: Complex64, mut b: Complex64) -> (Complex64, Complex64) {
    if b.norm() < a.norm() {
        std::mem::swap(&mut a, &mut b);
    }
    for _ in 0..64 {
        let mu = (b / a).re.round();
        b -= a * mu;
        if b.norm() < a.norm() {
            std::mem::swap(&mut a, &mut b);
        } else {
            break;
        }
    }
    if (b / a).im < 0.0 {
        b = -b;
    }
    (a, b)
}

/// `cot x`, stable for large `|Im x|`.
fn cot(x: Complex64) -> Complex64 {
    let one = c64(1.0, 0.0);
    if x.im >= 0.0 {
        let w = (2.0 * I * x).exp();
        I * (w + one) / (w - one)
    } else {
        let w = (-2.0 * I * x).exp();
        I * (one + w) / (one - w)
    }
}

/// `csc² x`, stable for large `|Im x|`.
fn csc2(x: Complex64) -> Complex64 {
    let one = c64(1.0, 0.0);
    let w = if x.im >= 0.0 {
        (2.0 * I * x).exp()
    } else {
        (-2.0 * I * x).exp()
    };
    let d = one - w;
    -4.0 * w / (d * d)
}

/// ℘(u) for the lattice generated by `periods`.
pub fn wp(u: Complex64, periods: PeriodPair, terms: usize) -> Result<Complex64> {
    Weierstrass::new(periods, terms)?.wp(u)
}

/// ζ(u) for the lattice generated by `periods`.
pub fn wzeta(u: Complex64, periods: PeriodPair, terms: usize) -> Result<Complex64> {
    Weierstrass::new(periods, terms)?.zeta(u)
}

/// `η₁ = ζ(P1/2)`.
pub fn eta1(periods: PeriodPair) -> Result<Complex64> {
    Weierstrass::new(periods, DEFAULT_TERMS)?.eta1()
}
