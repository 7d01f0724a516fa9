//! Quadrature grids and the finite kernels built on them.
//!
//! A kernel `K` on a domain with weight `ω` becomes the Hermitian matrix
//! `M_ij = √μ_i K(x_i, x_j) √μ_j` with `μ_i = dV_i · ω(x_i)`. Its spectrum
//! approximates that of the compression of `K` to the gridded region, which
//! stays a distance `inset` away from the boundary.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::{weight, BergmanKernel, DomainSpec, Point};
use crate::numerics::{check_unit_spectrum, hermitian_eig, ComplexMatrix, HermitianEig};

/// Default spectral margin `δ`: quadrature kernels are clamped to `[0, 1-δ]`.
pub const DEFAULT_CLAMP_DELTA: f64 = 1e-6;
/// Default distance kept from the boundary.
pub const DEFAULT_INSET: f64 = 0.15;
/// Clamping more than this fraction of the trace means the grid is too coarse.
pub const MAX_CLAMP_FRACTION: f64 = 0.1;

/// Quadrature discretization of a domain.
///
/// Layouts by domain, each using `resolution^{2d}` points at most:
///
/// * disk: polar grid on `|z| ≤ 1 - inset`, `resolution/2` rings by
///   `2·resolution` angles;
/// * annulus: the same polar grid on
///   `ρ + inset(1-ρ)/2 ≤ |z| ≤ 1 - inset(1-ρ)/2`;
/// * polydisk: tensor product of disk grids, one per coordinate;
/// * ball: shells in `t = Σ|z_j|²` on `t ≤ (1 - inset)²`, a stick-breaking
///   grid on the simplex of `|z_j|²/t`, and angles per coordinate.
///
/// Every node sits at the midpoint (for the ball, the weighted centroid) of
/// its cell and carries the exact cell volume, so the weights are positive and sum to the volume of the gridded
/// region.
#[derive(Clone, Debug)]
pub struct Grid {
    pub spec: DomainSpec,
    pub resolution: usize,
    pub inset: f64,
    pub points: Vec<Point>,
    pub quad_weights: Vec<f64>,
    pub weight_values: Vec<f64>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `μ_i = dV_i · ω(x_i)`.
    pub fn measure(&self) -> Vec<f64> {
        self.quad_weights
            .iter()
            .zip(&self.weight_values)
            .map(|(q, w)| q * w)
            .collect()
    }

    /// Exact Lebesgue volume of the gridded region.
    pub fn region_volume(&self) -> f64 {
        match self.spec {
            DomainSpec::Disk { .. } => PI * (1.0 - self.inset).powi(2),
            DomainSpec::Annulus { rho } => {
                let (a, b) = annulus_band(rho, self.inset);
                PI * (b * b - a * a)
            }
            DomainSpec::Polydisk { d } => (PI * (1.0 - self.inset).powi(2)).powi(d as i32),
            DomainSpec::Ball { d } => {
                crate::kernels::ball_volume(d) * (1.0 - self.inset).powi(2 * d as i32)
            }
        }
    }

    /// Indices of grid points whose Euclidean norm is below `radius`.
    pub fn within_radius(&self, radius: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.points[i].norm_sqr().sqrt() < radius)
            .collect()
    }

    /// CSV with columns `x, y` (or `x1, y1, x2, y2, …` for `d > 1`),
    /// `quad_weight, weight_value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.spec.dim();
        let mut header: Vec<String> = Vec::with_capacity(2 * d + 2);
        if d == 1 {
            header.extend(["x".to_string(), "y".to_string()]);
        } else {
            for j in 1..=d {
                header.push(format!("x{j}"));
                header.push(format!("y{j}"));
            }
        }
        header.extend(["quad_weight".to_string(), "weight_value".to_string()]);
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = Vec::with_capacity(header.len());
            for c in &self.points[i].coords {
                row.push(format!("{:?}", c.re));
                row.push(format!("{:?}", c.im));
            }
            row.push(format!("{:?}", self.quad_weights[i]));
            row.push(format!("{:?}", self.weight_values[i]));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::InvalidParameter(format!("csv write: {e}")))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("csv write: {e}"))
}

fn annulus_band(rho: f64, inset: f64) -> (f64, f64) {
    let trim = 0.5 * inset * (1.0 - rho);
    (rho + trim, 1.0 - trim)
}

/// Polar midpoint grid on `a ≤ |z| ≤ b`: `(node, cell area)` pairs.
fn polar_cells(a: f64, b: f64, resolution: usize) -> Vec<(Complex64, f64)> {
    let n_r = (resolution / 2).max(1);
    let n_t = 2 * resolution;
    let dt = 2.0 * PI / n_t as f64;
    let mut cells = Vec::with_capacity(n_r * n_t);
    for i in 0..n_r {
        let r0 = a + (b - a) * i as f64 / n_r as f64;
        let r1 = a + (b - a) * (i + 1) as f64 / n_r as f64;
        let r = 0.5 * (r0 + r1);
        let area = 0.5 * (r1 * r1 - r0 * r0) * dt;
        for j in 0..n_t {
            let th = dt * (j as f64 + 0.5);
            cells.push((Complex64::from_polar(r, th), area));
        }
    }
    cells
}

fn ball_cells(d: usize, radius: f64, resolution: usize) -> Vec<(Point, f64)> {
    let n_t = (resolution / 2).max(1);
    let n_v = (resolution / 2).max(1);
    let n_a = 2 * resolution;
    let t_max = radius * radius;
    let da = 2.0 * PI / n_a as f64;
    let df = d as f64;

    // Shells in t with exact ∫ t^{d-1} dt, node at the weighted centroid.
    let shells: Vec<(f64, f64)> = (0..n_t)
        .map(|k| {
            let t0 = t_max * k as f64 / n_t as f64;
            let t1 = t_max * (k + 1) as f64 / n_t as f64;
            let mass = (t1.powf(df) - t0.powf(df)) / df;
            let moment = (t1.powf(df + 1.0) - t0.powf(df + 1.0)) / (df + 1.0);
            (moment / mass, mass)
        })
        .collect();

    // Stick-breaking cells on the simplex: nodes u ∈ Δ_{d-1} and exact cell
    // integrals of the Jacobian ∏_k (1 - v_k)^{d-1-k}.
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for k in 1..d {
        let power = (d - 1 - k) as f64;
        let mut next = Vec::with_capacity(simplex.len() * n_v);
        for (vs, wgt) in &simplex {
            for c in 0..n_v {
                let a = c as f64 / n_v as f64;
                let b = (c + 1) as f64 / n_v as f64;
                // with x = 1 - v: ∫ x^p dx and ∫ (1 - x) x^p dx over [1-b, 1-a]
                let (x0, x1) = (1.0 - b, 1.0 - a);
                let integral = (x1.powf(power + 1.0) - x0.powf(power + 1.0)) / (power + 1.0);
                let first = integral
                    - (x1.powf(power + 2.0) - x0.powf(power + 2.0)) / (power + 2.0);
                let mut v = vs.clone();
                v.push(first / integral);
                next.push((v, wgt * integral));
            }
        }
        simplex = next;
    }
    let simplex: Vec<(Vec<f64>, f64)> = simplex
        .into_iter()
        .map(|(v, w)| {
            let mut u = Vec::with_capacity(d);
            let mut rest = 1.0;
            for vk in &v {
                u.push(rest * vk);
                rest *= 1.0 - vk;
            }
            u.push(rest);
            (u, w)
        })
        .collect();

    let mut cells = Vec::new();
    let n_angles = n_a.pow(d as u32);
    for &(t, wt) in &shells {
        for (u, wu) in &simplex {
            for idx in 0..n_angles {
                let mut rem = idx;
                let coords: Vec<Complex64> = u
                    .iter()
                    .map(|uj| {
                        let j = rem % n_a;
                        rem /= n_a;
                        Complex64::from_polar((t * uj).sqrt(), da * (j as f64 + 0.5))
                    })
                    .collect();
                let w = wt * wu * (0.5 * da).powi(d as i32);
                cells.push((Point::new(coords), w));
            }
        }
    }
    cells
}

/// Build the quadrature grid for `spec`.
pub fn build_grid(spec: DomainSpec, resolution: usize, inset: f64) -> Result<Grid> {
    spec.validate()?;
    if resolution < 2 {
        return Err(Error::InvalidParameter(format!("resolution {resolution} < 2")));
    }
    if !(inset > 0.0 && inset < 1.0) {
        return Err(Error::InvalidParameter(format!("inset {inset} not in (0, 1)")));
    }
    let cells: Vec<(Point, f64)> = match spec {
        DomainSpec::Disk { .. } => polar_cells(0.0, 1.0 - inset, resolution)
            .into_iter()
            .map(|(z, w)| (Point::scalar(z), w))
            .collect(),
        DomainSpec::Annulus { rho } => {
            let (a, b) = annulus_band(rho, inset);
            polar_cells(a, b, resolution)
                .into_iter()
                .map(|(z, w)| (Point::scalar(z), w))
                .collect()
        }
        DomainSpec::Polydisk { d } => {
            let base = polar_cells(0.0, 1.0 - inset, resolution);
            let mut acc: Vec<(Vec<Complex64>, f64)> = vec![(Vec::new(), 1.0)];
            for _ in 0..d {
                acc = acc
                    .iter()
                    .flat_map(|(c, w)| {
                        base.iter().map(move |(z, wz)| {
                            let mut c = c.clone();
                            c.push(*z);
                            (c, w * wz)
                        })
                    })
                    .collect();
            }
            acc.into_iter().map(|(c, w)| (Point::new(c), w)).collect()
        }
        DomainSpec::Ball { d } => ball_cells(d, 1.0 - inset, resolution),
    };
    let mut points = Vec::with_capacity(cells.len());
    let mut quad_weights = Vec::with_capacity(cells.len());
    let mut weight_values = Vec::with_capacity(cells.len());
    for (p, w) in cells {
        weight_values.push(weight(&spec, &p)?);
        points.push(p);
        quad_weights.push(w);
    }
    Ok(Grid {
        spec,
        resolution,
        inset,
        points,
        quad_weights,
        weight_values,
    })
}

/// Finite DPP kernel: a Hermitian matrix with spectrum in `[0, 1]`.
///
/// `labels[i]` names the site of the parent ground set (usually a grid
/// index) that row `i` stands for. Projection kernels are flagged so that
/// callers avoid forming `(I - K)^{-1}`.
#[derive(Clone, Debug)]
pub struct DppKernel {
    matrix: ComplexMatrix,
    labels: Option<Vec<usize>>,
    projection: bool,
    eig: OnceLock<HermitianEig>,
}

impl DppKernel {
    /// Validate a Hermitian contraction (symmetrizing first).
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::checked(matrix, false)
    }

    /// Validate an orthogonal projection: every eigenvalue within 1e-8 of 0 or 1.
    pub fn projection(matrix: ComplexMatrix) -> Result<Self> {
        let k = Self::checked(matrix, true)?;
        if let Some(bad) = k.eig()?.values.iter().find(|&&l| l.min((1.0 - l).abs()).abs() > 1e-8) {
            return Err(Error::InvalidParameter(format!(
                "projection kernel has eigenvalue {bad}"
            )));
        }
        Ok(k)
    }

    fn checked(matrix: ComplexMatrix, projection: bool) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let matrix = matrix.symmetrize();
        let eig = if matrix.rows() > 0 {
            let e = hermitian_eig(&matrix)?;
            check_unit_spectrum(&e.values)?;
            Some(e)
        } else {
            None
        };
        let k = Self {
            matrix,
            labels: None,
            projection,
            eig: OnceLock::new(),
        };
        if let Some(e) = eig {
            let _ = k.eig.set(e);
        }
        Ok(k)
    }

    /// Wrap a matrix known to be a Hermitian contraction by construction.
    pub(crate) fn trusted(matrix: ComplexMatrix, labels: Option<Vec<usize>>, projection: bool) -> Self {
        Self {
            matrix: matrix.symmetrize(),
            labels,
            projection,
            eig: OnceLock::new(),
        }
    }

    /// As [`Self::trusted`], with a decomposition already at hand.
    pub(crate) fn trusted_with_eig(
        matrix: ComplexMatrix,
        labels: Option<Vec<usize>>,
        projection: bool,
        eig: HermitianEig,
    ) -> Self {
        let k = Self::trusted(matrix, labels, projection);
        let _ = k.eig.set(eig);
        k
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.size() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} sites",
                labels.len(),
                self.size()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn zero(m: usize) -> Self {
        Self::trusted(ComplexMatrix::zeros(m, m), None, true)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Parent-site label of row `i` (identity when unlabeled).
    pub fn label(&self, i: usize) -> usize {
        self.labels.as_ref().map_or(i, |l| l[i])
    }

    pub fn is_projection(&self) -> bool {
        self.projection
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.matrix[(i, i)].re
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Cached eigen-decomposition.
    pub fn eig(&self) -> Result<&HermitianEig> {
        if let Some(e) = self.eig.get() {
            return Ok(e);
        }
        let e = if self.size() == 0 {
            HermitianEig {
                values: Vec::new(),
                vectors: ComplexMatrix::zeros(0, 0),
            }
        } else {
            hermitian_eig(&self.matrix)?
        };
        Ok(self.eig.get_or_init(|| e))
    }

    pub fn lambda_max(&self) -> Result<f64> {
        Ok(self.eig()?.max())
    }
}

/// Kernel matrix together with how much spectral mass the clamp moved.
#[derive(Clone, Debug)]
pub struct Discretized {
    pub kernel: DppKernel,
    pub clamp_moved: f64,
}

/// `M_ij = √μ_i K(x_i, x_j) √μ_j`, symmetrized and clamped to `[0, 1-δ]`.
pub fn kernel_matrix(grid: &Grid, clamp_delta: f64) -> Result<Discretized> {
    if !(0.0..1.0).contains(&clamp_delta) {
        return Err(Error::InvalidParameter(format!("clamp margin {clamp_delta}")));
    }
    let k = BergmanKernel::new(grid.spec)?;
    let m = grid.len();
    let sqrt_mu: Vec<f64> = grid.measure().iter().map(|v| v.sqrt()).collect();
    let mut mat = ComplexMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = k.eval(&grid.points[i], &grid.points[j])? * (sqrt_mu[i] * sqrt_mu[j]);
            mat[(i, j)] = v;
            mat[(j, i)] = v.conj();
        }
    }
    let mat = mat.symmetrize();
    let trace = mat.trace().re;
    let hi = 1.0 - clamp_delta;
    let mut eig = hermitian_eig(&mat)?;
    let moved: f64 = eig.values.iter().map(|&l| (l - l.clamp(0.0, hi)).abs()).sum();
    if moved > MAX_CLAMP_FRACTION * trace {
        return Err(Error::GridTooCoarse { moved, trace });
    }
    let clamped = if moved == 0.0 {
        mat
    } else {
        eig.values.iter_mut().for_each(|l| *l = l.clamp(0.0, hi));
        eig.reconstruct()
    };
    let kernel = DppKernel {
        matrix: clamped,
        labels: Some((0..m).collect()),
        projection: false,
        eig: OnceLock::from(eig),
    };
    Ok(Discretized {
        kernel,
        clamp_moved: moved,
    })
}

/// Rank-`N` projection onto the span of `1, z, …, z^{N-1}` in the discrete
/// inner product `⟨f, g⟩ = Σ μ_i f(x_i) conj(g(x_i))` with `μ_i` built from
/// the weight `ω_α`.
pub fn basis_projection_kernel(alpha: f64, n_basis: usize, grid: &Grid) -> Result<DppKernel> {
    if !matches!(grid.spec, DomainSpec::Disk { .. }) {
        return Err(Error::InvalidParameter("basis projection needs a disk grid".into()));
    }
    let m = grid.len();
    if n_basis > m {
        return Err(Error::InvalidParameter(format!(
            "basis rank {n_basis} exceeds grid size {m}"
        )));
    }
    let spec = DomainSpec::Disk { alpha };
    let sqrt_mu: Vec<f64> = grid
        .points
        .iter()
        .zip(&grid.quad_weights)
        .map(|(p, q)| Ok((q * weight(&spec, p)?).sqrt()))
        .collect::<Result<_>>()?;

    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(n_basis);
    for n in 0..n_basis {
        let mut v: Vec<Complex64> = (0..m)
            .map(|i| grid.points[i].coords[0].powi(n as i32) * sqrt_mu[i])
            .collect();
        let norm0 = l2(&v);
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for b in &basis {
                let proj: Complex64 = b.iter().zip(&v).map(|(bi, vi)| bi.conj() * vi).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
        }
        let norm = l2(&v);
        if norm <= 1e-10 * norm0 {
            return Err(Error::InvalidParameter(format!(
                "monomial z^{n} is numerically dependent on lower ones on this grid"
            )));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    let mat = ComplexMatrix::from_fn(m, m, |i, j| {
        basis.iter().map(|b| b[i] * b[j].conj()).sum()
    });
    Ok(DppKernel::trusted(mat, Some((0..m).collect()), true))
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Principal compression `χ_B K χ_B`; labels follow the selected rows.
pub fn restrict(k: &DppKernel, subset: &[usize]) -> Result<DppKernel> {
    if let Some(&bad) = subset.iter().find(|&&i| i >= k.size()) {
        return Err(Error::InvalidParameter(format!(
            "index {bad} outside ground set of size {}",
            k.size()
        )));
    }
    let labels = subset.iter().map(|&i| k.label(i)).collect();
    Ok(DppKernel::trusted(k.matrix().principal(subset), Some(labels), false))
}

/// Discrete Gram matrix of the first `n` monomials in the grid inner
/// product; diagonal entries approximate `‖z^j‖²` over the gridded disk.
pub fn monomial_gram(grid: &Grid, n: usize) -> ComplexMatrix {
    let mu = grid.measure();
    ComplexMatrix::from_fn(n, n, |a, b| {
        grid.points
            .iter()
            .zip(&mu)
            .map(|(p, w)| p.coords[0].powi(a as i32) * p.coords[0].conj().powi(b as i32) * *w)
            .sum()
    })
}
