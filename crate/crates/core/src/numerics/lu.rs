use num_complex::Complex64;

use super::matrix::{c64, ComplexMatrix};
use crate::error::{Error, Result};

/// Pivots below this fraction of the largest pivot count as singular.
const SINGULAR_RATIO: f64 = 1e-12;

/// Partial-pivot LU factorization `P M = L U`, stored packed.
#[derive(Clone, Debug)]
pub struct Lu {
    packed: ComplexMatrix,
    perm: Vec<usize>,
    odd: bool,
}

impl Lu {
    pub fn factor(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        let n = m.rows();
        let mut a = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut odd = false;
        for k in 0..n {
            let mut piv = k;
            let mut best = a[(k, k)].norm();
            for i in (k + 1)..n {
                let v = a[(i, k)].norm();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if piv != k {
                for j in 0..n {
                    let t = a[(k, j)];
                    a[(k, j)] = a[(piv, j)];
                    a[(piv, j)] = t;
                }
                perm.swap(k, piv);
                odd = !odd;
            }
            let pivot = a[(k, k)];
            if pivot == Complex64::default() {
                continue;
            }
            for i in (k + 1)..n {
                let f = a[(i, k)] / pivot;
                a[(i, k)] = f;
                if f == Complex64::default() {
                    continue;
                }
                for j in (k + 1)..n {
                    let u = a[(k, j)];
                    a[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self {
            packed: a,
            perm,
            odd,
        })
    }

    pub fn det(&self) -> Complex64 {
        let n = self.packed.rows();
        let mut d = if self.odd { c64(-1.0, 0.0) } else { c64(1.0, 0.0) };
        for k in 0..n {
            d *= self.packed[(k, k)];
        }
        d
    }

    /// `max |u_kk| / min |u_kk|`; infinite when a pivot vanishes.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.packed.rows();
        if n == 0 {
            return 1.0;
        }
        let pivots: Vec<f64> = (0..n).map(|k| self.packed[(k, k)].norm()).collect();
        let max = pivots.iter().copied().fold(0.0, f64::max);
        let min = pivots.iter().copied().fold(f64::INFINITY, f64::min);
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn solve(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.packed.rows();
        if b.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} rows, system has {n}",
                b.rows()
            )));
        }
        let cond = self.condition_estimate();
        if !(cond * SINGULAR_RATIO < 1.0) {
            return Err(Error::Singular { condition: cond });
        }
        let a = &self.packed;
        let m = b.cols();
        let mut x = ComplexMatrix::from_fn(n, m, |i, j| b[(self.perm[i], j)]);
        for j in 0..m {
            for i in 0..n {
                let mut s = x[(i, j)];
                for k in 0..i {
                    s -= a[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, j)];
                for k in (i + 1)..n {
                    s -= a[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s / a[(i, i)];
            }
        }
        Ok(x)
    }
}

/// General complex determinant by partial-pivot LU. Singular input gives 0.
pub fn det(m: &ComplexMatrix) -> Result<Complex64> {
    Ok(Lu::factor(m)?.det())
}

/// Solve `M X = B`.
pub fn solve(m: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    Lu::factor(m)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Cofactor expansion along the first row; exponential, test-only oracle.
    fn cofactor_det(m: &ComplexMatrix) -> Complex64 {
        let n = m.rows();
        if n == 0 {
            return c64(1.0, 0.0);
        }
        if n == 1 {
            return m[(0, 0)];
        }
        let mut total = c64(0.0, 0.0);
        for j in 0..n {
            let rows: Vec<usize> = (1..n).collect();
            let cols: Vec<usize> = (0..n).filter(|&c| c != j).collect();
            let minor = cofactor_det(&m.select(&rows, &cols));
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            total += m[(0, j)] * minor * sign;
        }
        total
    }

    #[test]
    fn trivial_determinants() {
        assert_eq!(det(&ComplexMatrix::identity(5)).unwrap(), c64(1.0, 0.0));
        let d = ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c64(2.0, 0.0),
            (1, 1) => c64(0.0, 3.0),
            _ => c64(0.0, 0.0),
        });
        assert!((det(&d).unwrap() - c64(0.0, 6.0)).norm() < 1e-15);
        assert_eq!(det(&ComplexMatrix::zeros(3, 3)).unwrap(), c64(0.0, 0.0));
    }

    #[test]
    fn det_matches_cofactor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let m = random_complex(&mut rng, 4, 4);
            let a = det(&m).unwrap();
            let b = cofactor_det(&m);
            assert!((a - b).norm() <= 1e-10 * b.norm().max(1.0));
        }
    }

    #[test]
    fn det_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let a = random_complex(&mut rng, 4, 4);
            let b = random_complex(&mut rng, 4, 4);
            let lhs = det(&a.matmul(&b)).unwrap();
            let rhs = det(&a).unwrap() * det(&b).unwrap();
            assert!((lhs - rhs).norm() <= 1e-9 * rhs.norm());
        }
    }

    #[test]
    fn solve_trivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_complex(&mut rng, 3, 2);
        let x = solve(&ComplexMatrix::identity(3), &b).unwrap();
        assert_eq!(x, b);
        let x = solve(&ComplexMatrix::identity(3).scale(2.0), &ComplexMatrix::identity(3)).unwrap();
        assert!(x.max_abs_diff(&ComplexMatrix::identity(3).scale(0.5)) < 1e-16);
    }

    #[test]
    fn solve_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let m = random_complex(&mut rng, 5, 5).add(&ComplexMatrix::identity(5).scale(3.0));
            let b = random_complex(&mut rng, 5, 3);
            let x = solve(&m, &b).unwrap();
            assert!(m.matmul(&x).max_abs_diff(&b) <= 1e-9 * b.max_abs());
        }
    }

    #[test]
    fn solve_singular_reports_condition() {
        let m = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        match solve(&m, &ComplexMatrix::identity(2)) {
            Err(Error::Singular { condition }) => assert!(condition.is_infinite()),
            other => panic!("expected singular error, got {other:?}"),
        }
    }
}
