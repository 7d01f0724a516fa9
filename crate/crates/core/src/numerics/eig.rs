use num_complex::Complex64;

use super::matrix::{c64, ComplexMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-13;

/// Eigen-decomposition `M = U Λ U*` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    /// Real eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.column(k)
    }

    /// `U f(Λ) U*`, symmetrized.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.dim();
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let u = &self.vectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = c64(0.0, 0.0);
                for (k, &l) in mapped.iter().enumerate() {
                    if l != 0.0 {
                        acc += u[(i, k)] * u[(j, k)].conj() * l;
                    }
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc.conj();
            }
            out[(i, i)] = c64(out[(i, i)].re, 0.0);
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_spectrum(|l| l)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// The input is symmetrized first, so tiny asymmetries from quadrature are
/// harmless. Stops once the off-diagonal Frobenius norm drops below
/// `1e-13 ‖M‖_F`, or fails after 100 sweeps.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = m.rows();
    let mut a = m.symmetrize();
    // Eigenvectors are accumulated as rows of `vt` (columns of U).
    let mut vt = ComplexMatrix::identity(n);
    let tol = OFF_DIAGONAL_TOL * a.frobenius();

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= tol {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut vt, p, q);
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, k| vt[(order[k], i)]);
    Ok(HermitianEig { values, vectors })
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for (j, z) in a.row(i).iter().enumerate() {
            if i != j {
                s += z.norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Mutable views of rows `p < q`.
fn two_rows(data: &mut [Complex64], n: usize, p: usize, q: usize) -> (&mut [Complex64], &mut [Complex64]) {
    let (head, tail) = data.split_at_mut(q * n);
    (&mut head[p * n..(p + 1) * n], &mut tail[..n])
}

/// One complex Jacobi rotation annihilating `a[p][q]`.
///
/// With `a_pq = |a_pq| e^{iφ}` the rotation is
/// `G = [[c, s e^{iφ}], [-s e^{-iφ}, c]]` on the `(p, q)` plane, with `(c, s)`
/// the real symmetric rotation for `[[a_pp, |a_pq|], [|a_pq|, a_qq]]`.
/// Only rows `p`, `q` of `G* A G` are formed; columns follow by symmetry.
fn rotate(a: &mut ComplexMatrix, vt: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let abs = apq.norm();
    if abs == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let phase = apq / abs;
    let theta = (aqq - app) / (2.0 * abs);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let sp = phase * s;
    let sp_conj = sp.conj();
    let n = a.rows();

    {
        let (rp, rq) = two_rows(a.data_mut(), n, p, q);
        for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
            let (apk, aqk) = (*x, *y);
            *x = apk * c - aqk * sp;
            *y = apk * sp_conj + aqk * c;
        }
    }
    for k in 0..n {
        if k != p && k != q {
            a[(k, p)] = a[(p, k)].conj();
            a[(k, q)] = a[(q, k)].conj();
        }
    }
    a[(p, q)] = c64(0.0, 0.0);
    a[(q, p)] = c64(0.0, 0.0);
    a[(p, p)] = c64(app - t * abs, 0.0);
    a[(q, q)] = c64(aqq + t * abs, 0.0);

    let (wp, wq) = two_rows(vt.data_mut(), n, p, q);
    for (x, y) in wp.iter_mut().zip(wq.iter_mut()) {
        let (vp, vq) = (*x, *y);
        *x = vp * c - vq * sp_conj;
        *y = vp * sp + vq * c;
    }
}
