//! Reduced Palm kernels.
//!
//! Conditioning `DPP(K)` to contain the sites `p₁…p_ℓ` and removing them
//! gives `DPP(K^𝔭)`. Two routes compute `K^𝔭`:
//!
//! * iterated one-point Schur complements
//!   `K^p(x, y) = K(x, y) - K(x, p) K(p, y) / K(p, p)` (production path);
//! * the bordered-determinant ratio
//!   `K^𝔭(x, y) = det[[K(x,y), K(x,p_j)], [K(p_i,y), K(p_i,p_j)]] / det[K(p_i,p_j)]`
//!   (cross-check).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discretize::DppKernel;
use crate::dpp::{correlation, exact_distribution, mask, ConfigPmf, Configuration};
use crate::error::{Error, Result};
use crate::numerics::{c64, det, ComplexMatrix};

/// Pivots at or below this are treated as outside the support of the
/// correlation measure.
pub const PALM_PIVOT_FLOOR: f64 = 1e-12;

/// Distinct positions `p₁, …, p_ℓ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PalmTuple {
    indices: Vec<usize>,
}

impl PalmTuple {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("Palm positions must be distinct".into()));
        }
        Ok(Self { indices })
    }

    pub fn single(p: usize) -> Self {
        Self { indices: vec![p] }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Concatenation `(p, q)`.
    pub fn concat(&self, other: &PalmTuple) -> Result<Self> {
        let mut v = self.indices.clone();
        v.extend_from_slice(&other.indices);
        Self::new(v)
    }
}

/// One Schur step on a raw Hermitian matrix; row and column `p` become
/// exactly zero.
pub(crate) fn schur_in_place(m: &mut ComplexMatrix, p: usize) -> Result<()> {
    let n = m.rows();
    let pivot = m[(p, p)].re;
    if !(pivot > PALM_PIVOT_FLOOR) {
        return Err(Error::UndefinedPalm { index: p, pivot });
    }
    let col: Vec<Complex64> = (0..n).map(|i| m[(i, p)]).collect();
    for i in 0..n {
        if col[i] == Complex64::default() {
            continue;
        }
        let f = col[i] / pivot;
        for j in i..n {
            let v = m[(i, j)] - f * col[j].conj();
            m[(i, j)] = v;
            if j != i {
                m[(j, i)] = v.conj();
            }
        }
        m[(i, i)] = c64(m[(i, i)].re, 0.0);
    }
    for i in 0..n {
        m[(i, p)] = c64(0.0, 0.0);
        m[(p, i)] = c64(0.0, 0.0);
    }
    Ok(())
}

/// One-point reduced Palm kernel `K^p`.
pub fn palm_schur(k: &DppKernel, p: usize) -> Result<DppKernel> {
    check_site(k, p)?;
    let mut m = k.matrix().clone();
    schur_in_place(&mut m, p)?;
    Ok(DppKernel::trusted(
        m,
        k.labels().map(<[usize]>::to_vec),
        k.is_projection(),
    ))
}

fn check_site(k: &DppKernel, p: usize) -> Result<()> {
    if p >= k.size() {
        return Err(Error::InvalidParameter(format!(
            "site {p} outside ground set of size {}",
            k.size()
        )));
    }
    Ok(())
}

/// `K^𝔭(x, y)` as a ratio of bordered determinants.
pub fn palm_ratio(k: &DppKernel, p: &PalmTuple, x: usize, y: usize) -> Result<Complex64> {
    for &i in p.indices().iter().chain([&x, &y]) {
        check_site(k, i)?;
    }
    let ps = p.indices();
    let minor = det(&k.matrix().principal(ps))?;
    if minor.norm() <= PALM_PIVOT_FLOOR {
        return Err(Error::SingularMinor(minor.norm()));
    }
    let mut rows = vec![x];
    rows.extend_from_slice(ps);
    let mut cols = vec![y];
    cols.extend_from_slice(ps);
    let bordered = det(&k.matrix().select(&rows, &cols))?;
    Ok(bordered / minor)
}

/// All entries of `K^𝔭` via [`palm_ratio`].
pub fn palm_ratio_kernel(k: &DppKernel, p: &PalmTuple) -> Result<ComplexMatrix> {
    let n = k.size();
    let mut out = ComplexMatrix::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            out[(x, y)] = palm_ratio(k, p, x, y)?;
        }
    }
    Ok(out)
}

/// Reduced Palm kernel `K^𝔭` of any order, by iterated Schur complements.
///
/// For a projection `K` the result is the projection onto the vectors of
/// the range orthogonal to the rows `K(p_i, ·)`, of rank reduced by `ℓ`.
pub fn palm_kernel(k: &DppKernel, p: &PalmTuple) -> Result<DppKernel> {
    for &i in p.indices() {
        check_site(k, i)?;
    }
    let rho = correlation(k, &Configuration::new(p.indices().to_vec(), k.size())?)?;
    if !(rho > PALM_PIVOT_FLOOR) {
        return Err(Error::SingularMinor(rho));
    }
    iterated_schur(k, p)
}

/// Iterated Schur steps with only the per-step pivot floor.
///
/// `det K_𝔭` is the product of the pivots, so on fine grids (where every
/// diagonal entry carries a cell measure) it can fall below the absolute
/// floor of [`palm_kernel`] for well-separated points with healthy pivots.
/// Conditioning on sampled exteriors goes through this entry point.
pub fn iterated_schur(k: &DppKernel, p: &PalmTuple) -> Result<DppKernel> {
    for &i in p.indices() {
        check_site(k, i)?;
    }
    let mut m = k.matrix().clone();
    for &i in p.indices() {
        schur_in_place(&mut m, i)?;
    }
    Ok(DppKernel::trusted(
        m,
        k.labels().map(<[usize]>::to_vec),
        k.is_projection(),
    ))
}

/// Brute-force Palm law: condition the exact law on `A ⊇ 𝔭`, then remove
/// `𝔭`. The result lives on the same ground set and charges only
/// configurations avoiding `𝔭`.
pub fn palm_distribution_oracle(k: &DppKernel, p: &PalmTuple) -> Result<ConfigPmf> {
    if k.size() > 10 {
        return Err(Error::GroundSetTooLarge {
            size: k.size(),
            limit: 10,
        });
    }
    let pm = mask(p.indices(), k.size())?;
    let law = exact_distribution(k)?;
    let conditioned = law.condition(pm, pm)?;
    Ok(conditioned.project(!pm))
}
