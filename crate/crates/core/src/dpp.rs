//! Determinantal point processes on a finite ground set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discretize::{restrict, DppKernel};
use crate::error::{Error, Result};
use crate::numerics::{c64, fredholm_det_finite, hermitian_det, solve, ComplexMatrix};
use crate::palm::schur_in_place;
use crate::rng::RngSeed;

/// Largest ground set for which the full law over `2^m` configurations is built.
pub const MAX_EXACT_SITES: usize = 12;

/// Smallest remaining diagonal mass the projection sampler accepts.
const SAMPLER_MASS_FLOOR: f64 = 1e-12;

/// Finite simple configuration: sorted distinct site indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    indices: Vec<usize>,
}

impl Configuration {
    pub fn new(mut indices: Vec<usize>, ground: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("repeated site in configuration".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= ground {
                return Err(Error::InvalidParameter(format!(
                    "site {last} outside ground set of size {ground}"
                )));
            }
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_mask(mask: u32) -> Self {
        Self {
            indices: (0..32).filter(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn mask(&self) -> u32 {
        self.indices.iter().fold(0, |m, &i| m | 1 << i)
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

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Sites of `self` lying in `set` (given as a sorted or unsorted list).
    pub fn intersect(&self, set: &[usize]) -> Configuration {
        Self {
            indices: self.indices.iter().copied().filter(|i| set.contains(i)).collect(),
        }
    }
}

/// Probability mass over all configurations of a ground set of `m ≤ 12`
/// sites, indexed by bitmask.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigPmf {
    ground: usize,
    probs: Vec<f64>,
}

impl ConfigPmf {
    pub fn new(ground: usize, probs: Vec<f64>) -> Result<Self> {
        if ground > MAX_EXACT_SITES {
            return Err(Error::GroundSetTooLarge {
                size: ground,
                limit: MAX_EXACT_SITES,
            });
        }
        if probs.len() != 1 << ground {
            return Err(Error::DimensionMismatch(format!(
                "{} masses for {} sites",
                probs.len(),
                ground
            )));
        }
        Ok(Self { ground, probs })
    }

    pub fn point_mass(ground: usize, mask: u32) -> Self {
        let mut probs = vec![0.0; 1 << ground];
        probs[mask as usize] = 1.0;
        Self { ground, probs }
    }

    pub fn ground(&self) -> usize {
        self.ground
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, mask: u32) -> f64 {
        self.probs[mask as usize]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.probs.iter().enumerate().map(|(m, &p)| (m as u32, p))
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        assert_eq!(self.ground, other.ground, "pmfs on different ground sets");
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// `P(A ⊇ set)`.
    pub fn inclusion(&self, set: u32) -> f64 {
        self.iter().filter(|(m, _)| m & set == set).map(|(_, p)| p).sum()
    }

    /// `P(A ∩ set = ∅)`.
    pub fn avoidance(&self, set: u32) -> f64 {
        self.iter().filter(|(m, _)| m & set == 0).map(|(_, p)| p).sum()
    }

    /// Law of `#A`.
    pub fn cardinality(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ground + 1];
        for (m, p) in self.iter() {
            out[m.count_ones() as usize] += p;
        }
        out
    }

    pub fn expectation(&self, f: impl Fn(u32) -> f64) -> f64 {
        self.iter().map(|(m, p)| p * f(m)).sum()
    }

    /// Embed a pmf over the sites of a labeled kernel into a larger ground
    /// set, sending local site `i` to `labels[i]`.
    pub fn lift(&self, labels: &[usize], ground: usize) -> Result<Self> {
        if labels.len() != self.ground {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} sites",
                labels.len(),
                self.ground
            )));
        }
        let mut out = vec![0.0; 1 << ground];
        for (m, p) in self.iter() {
            let mut g = 0u32;
            for (i, &l) in labels.iter().enumerate() {
                if m >> i & 1 == 1 {
                    g |= 1 << l;
                }
            }
            out[g as usize] += p;
        }
        Self::new(ground, out)
    }

    /// Condition on `A ∩ window = pattern` (with `pattern ⊆ window`).
    pub fn condition(&self, window: u32, pattern: u32) -> Result<Self> {
        let z: f64 = self
            .iter()
            .filter(|(m, _)| m & window == pattern)
            .map(|(_, p)| p)
            .sum();
        if z <= 1e-12 {
            return Err(Error::ZeroProbability(z));
        }
        let probs = self
            .iter()
            .map(|(m, p)| if m & window == pattern { p / z } else { 0.0 })
            .collect();
        Ok(Self {
            ground: self.ground,
            probs,
        })
    }

    /// Push forward under `A ↦ A ∩ keep`.
    pub fn project(&self, keep: u32) -> Self {
        let mut probs = vec![0.0; self.probs.len()];
        for (m, p) in self.iter() {
            probs[(m & keep) as usize] += p;
        }
        Self {
            ground: self.ground,
            probs,
        }
    }
}

fn mask_of(indices: &[usize], ground: usize) -> Result<u32> {
    if ground > 32 {
        return Err(Error::GroundSetTooLarge { size: ground, limit: 32 });
    }
    indices.iter().try_fold(0u32, |m, &i| {
        if i >= ground {
            Err(Error::InvalidParameter(format!("site {i} outside ground set")))
        } else {
            Ok(m | 1 << i)
        }
    })
}

pub(crate) fn mask(indices: &[usize], ground: usize) -> Result<u32> {
    mask_of(indices, ground)
}

/// `ρ(A) = det K_A`, the correlation of the sites in `A`.
pub fn correlation(k: &DppKernel, a: &Configuration) -> Result<f64> {
    if let Some(&bad) = a.indices().iter().find(|&&i| i >= k.size()) {
        return Err(Error::InvalidParameter(format!("site {bad} outside ground set")));
    }
    hermitian_det(&k.matrix().principal(a.indices()))
}

/// `P(no point in B) = det(I - K_B)`.
pub fn gap_probability(k: &DppKernel, b: &[usize]) -> Result<f64> {
    if b.is_empty() {
        return Ok(1.0);
    }
    fredholm_det_finite(restrict(k, b)?.matrix())
}

/// Law of the number of points: Poisson-binomial with the eigenvalues of
/// `K` as success probabilities.
pub fn number_distribution(k: &DppKernel) -> Result<Vec<f64>> {
    let eig = k.eig()?;
    Ok(poisson_binomial(&eig.values))
}

pub(crate) fn poisson_binomial(ps: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; ps.len() + 1];
    pmf[0] = 1.0;
    for (n, &p) in ps.iter().enumerate() {
        let p = p.clamp(0.0, 1.0);
        for k in (1..=n + 1).rev() {
            pmf[k] = pmf[k] * (1.0 - p) + pmf[k - 1] * p;
        }
        pmf[0] *= 1.0 - p;
    }
    pmf
}

/// Spectral sampler: eigen-decomposition is done once, then each draw
/// thins the eigenvectors and samples the resulting projection DPP site by
/// site through one-point Schur (Palm) updates.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    kernel: &'a DppKernel,
}

impl<'a> Sampler<'a> {
    pub fn new(kernel: &'a DppKernel) -> Result<Self> {
        kernel.eig()?;
        Ok(Self { kernel })
    }

    pub fn sample(&self, seed: RngSeed) -> Result<Configuration> {
        let mut rng = seed.rng();
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> Result<Configuration> {
        let eig = self.kernel.eig()?;
        let m = self.kernel.size();
        let kept: Vec<usize> = (0..eig.dim())
            .filter(|&k| rng.random::<f64>() < eig.values[k].clamp(0.0, 1.0))
            .collect();
        if kept.is_empty() {
            return Ok(Configuration::empty());
        }
        let u = &eig.vectors;
        let mut proj = ComplexMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut acc = c64(0.0, 0.0);
                for &k in &kept {
                    acc += u[(i, k)] * u[(j, k)].conj();
                }
                proj[(i, j)] = acc;
                proj[(j, i)] = acc.conj();
            }
        }
        let mut picked = Vec::with_capacity(kept.len());
        for _ in 0..kept.len() {
            let diag: Vec<f64> = (0..m).map(|i| proj[(i, i)].re.max(0.0)).collect();
            let total: f64 = diag.iter().sum();
            if total < SAMPLER_MASS_FLOOR {
                return Err(Error::UndefinedPalm {
                    index: picked.last().copied().unwrap_or(0),
                    pivot: total,
                });
            }
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut choice = None;
            for (i, &d) in diag.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                acc += d;
                choice = Some(i);
                if acc > target {
                    break;
                }
            }
            let x = choice.expect("positive diagonal mass");
            schur_in_place(&mut proj, x)?;
            picked.push(x);
        }
        Configuration::new(picked, m)
    }
}

/// One draw from `DPP(K)`.
pub fn sample(k: &DppKernel, seed: RngSeed) -> Result<Configuration> {
    Sampler::new(k)?.sample(seed)
}

/// The full law of `DPP(K)` by enumeration.
///
/// Strict contractions use the L-ensemble `L = K (I - K)^{-1}`,
/// `P(A) = det L_A · det(I - K)`. Projection kernels use inclusion–exclusion
/// over the correlations, `P(A) = Σ_{B ⊇ A} (-1)^{|B∖A|} det K_B`.
pub fn exact_distribution(k: &DppKernel) -> Result<ConfigPmf> {
    let m = k.size();
    if m > MAX_EXACT_SITES {
        return Err(Error::GroundSetTooLarge {
            size: m,
            limit: MAX_EXACT_SITES,
        });
    }
    let subsets = 1usize << m;
    let minor = |mat: &ComplexMatrix, mask: usize| -> Result<f64> {
        let idx: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        hermitian_det(&mat.principal(&idx))
    };
    let mut probs = vec![0.0; subsets];
    if k.is_projection() {
        for (mask, p) in probs.iter_mut().enumerate() {
            *p = minor(k.matrix(), mask)?;
        }
        // superset Möbius inversion
        for bit in 0..m {
            for mask in 0..subsets {
                if mask >> bit & 1 == 0 {
                    probs[mask] -= probs[mask | 1 << bit];
                }
            }
        }
    } else {
        let lmax = k.lambda_max()?;
        if lmax >= 1.0 - 1e-12 {
            return Err(Error::EigenvalueOne(lmax));
        }
        let i_minus_k = ComplexMatrix::identity(m).sub(k.matrix());
        let l = solve(&i_minus_k, k.matrix())?.symmetrize();
        let norm = fredholm_det_finite(k.matrix())?;
        for (mask, p) in probs.iter_mut().enumerate() {
            *p = minor(&l, mask)? * norm;
        }
    }
    for p in probs.iter_mut() {
        if *p < 0.0 && *p > -1e-12 {
            *p = 0.0;
        }
    }
    ConfigPmf::new(m, probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_contraction, random_projection};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn diag(vals: &[f64]) -> DppKernel {
        DppKernel::new(ComplexMatrix::from_real_diag(vals)).unwrap()
    }

    fn rand_kernel(seed: u64, m: usize) -> DppKernel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DppKernel::new(random_contraction(&mut rng, m, 0.05, 0.95)).unwrap()
    }

    fn rand_projection(seed: u64, m: usize, r: usize) -> DppKernel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DppKernel::projection(random_projection(&mut rng, m, r)).unwrap()
    }

    #[test]
    fn configuration_validation() {
        assert!(Configuration::new(vec![2, 2], 4).is_err());
        assert!(Configuration::new(vec![4], 4).is_err());
        let c = Configuration::new(vec![3, 0, 2], 4).unwrap();
        assert_eq!(c.indices(), &[0, 2, 3]);
        assert_eq!(c.mask(), 0b1101);
        assert_eq!(Configuration::from_mask(0b1101), c);
        assert_eq!(serde_json::to_string(&c).unwrap(), "[0,2,3]");
    }

    #[test]
    fn correlation_cases() {
        let k = rand_kernel(1, 5);
        assert_eq!(correlation(&k, &Configuration::empty()).unwrap(), 1.0);
        let one = Configuration::new(vec![3], 5).unwrap();
        assert!((correlation(&k, &one).unwrap() - k.diag(3)).abs() < 1e-15);
        let pair = Configuration::new(vec![1, 4], 5).unwrap();
        let want = k.diag(1) * k.diag(4) - k.entry(1, 4).norm_sqr();
        assert!((correlation(&k, &pair).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn gap_cases() {
        let k = rand_kernel(2, 6);
        assert_eq!(gap_probability(&k, &[]).unwrap(), 1.0);
        let p = rand_projection(3, 6, 2);
        let all: Vec<usize> = (0..6).collect();
        assert!(gap_probability(&p, &all).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gap_matches_enumeration() {
        for seed in 0..5 {
            let m = 4 + seed as usize;
            let k = rand_kernel(10 + seed, m);
            let pmf = exact_distribution(&k).unwrap();
            for b in 0u32..(1 << m) {
                let idx = Configuration::from_mask(b);
                let g = gap_probability(&k, idx.indices()).unwrap();
                assert!((g - pmf.avoidance(b)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn number_distribution_cases() {
        let p = rand_projection(4, 7, 3);
        let nd = number_distribution(&p).unwrap();
        assert!((nd[3] - 1.0).abs() < 1e-8);
        let half = number_distribution(&diag(&[0.5])).unwrap();
        assert_eq!(half, vec![0.5, 0.5]);
        let k = rand_kernel(5, 8);
        let nd = number_distribution(&k).unwrap();
        assert!((nd.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mean: f64 = nd.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert!((mean - k.trace()).abs() < 1e-10);
    }

    #[test]
    fn number_distribution_is_cardinality_pushforward() {
        for seed in 0..5 {
            let k = rand_kernel(20 + seed, 6 + seed as usize);
            let a = number_distribution(&k).unwrap();
            let b = exact_distribution(&k).unwrap().cardinality();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exact_trivial_cases() {
        let single = exact_distribution(&diag(&[0.3])).unwrap();
        assert!((single.prob(0) - 0.7).abs() < 1e-15 && (single.prob(1) - 0.3).abs() < 1e-15);
        let two = exact_distribution(&diag(&[0.3, 0.6])).unwrap();
        let want = [0.7 * 0.4, 0.3 * 0.4, 0.7 * 0.6, 0.3 * 0.6];
        for (m, w) in want.iter().enumerate() {
            assert!((two.prob(m as u32) - w).abs() < 1e-14);
        }
        assert!(matches!(
            exact_distribution(&DppKernel::zero(13)),
            Err(Error::GroundSetTooLarge { .. })
        ));
        let unflagged = DppKernel::new(ComplexMatrix::from_real_diag(&[1.0, 0.2])).unwrap();
        assert!(matches!(exact_distribution(&unflagged), Err(Error::EigenvalueOne(_))));
    }

    #[test]
    fn exact_marginals_reproduce_correlations() {
        let cases = [rand_kernel(30, 5), rand_kernel(31, 7), rand_projection(32, 6, 3)];
        for k in &cases {
            let m = k.size();
            let pmf = exact_distribution(k).unwrap();
            assert!((pmf.total() - 1.0).abs() < 1e-9);
            assert!(pmf.probs().iter().all(|&p| p >= 0.0));
            for s in 0u32..(1 << m) {
                if s.count_ones() <= 3 {
                    let c = correlation(k, &Configuration::from_mask(s)).unwrap();
                    assert!((pmf.inclusion(s) - c).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn projection_counts_are_fixed() {
        let p = rand_projection(33, 6, 2);
        let pmf = exact_distribution(&p).unwrap();
        let card = pmf.cardinality();
        assert!((card[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sampler_trivial_kernels() {
        let zero = DppKernel::zero(4);
        let full = DppKernel::projection(ComplexMatrix::identity(3)).unwrap();
        for s in 0..20 {
            assert!(sample(&zero, RngSeed::new(s, 0)).unwrap().is_empty());
            assert_eq!(sample(&full, RngSeed::new(s, 0)).unwrap().indices(), &[0, 1, 2]);
        }
    }

    #[test]
    fn sampler_is_reproducible() {
        let k = rand_kernel(40, 8);
        let s = Sampler::new(&k).unwrap();
        let seed = RngSeed::new(99, 5);
        assert_eq!(s.sample(seed).unwrap(), s.sample(seed).unwrap());
    }

    #[test]
    fn singleton_frequencies() {
        let k = rand_kernel(41, 6);
        let s = Sampler::new(&k).unwrap();
        let n = 10_000;
        let mut counts = [0usize; 6];
        let base = RngSeed::new(7, 0);
        for t in 0..n {
            for &i in s.sample(base.split(t)).unwrap().indices() {
                counts[i] += 1;
            }
        }
        for i in 0..6 {
            let p = k.diag(i);
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let f = counts[i] as f64 / n as f64;
            assert!((f - p).abs() <= 3.0 * sigma, "site {i}: {f} vs {p}");
        }
    }

    #[test]
    fn gap_matches_monte_carlo() {
        let k = rand_kernel(42, 8);
        let b = [1, 4, 6];
        let g = gap_probability(&k, &b).unwrap();
        let s = Sampler::new(&k).unwrap();
        let n = 10_000;
        let base = RngSeed::new(8, 1);
        let empty = (0..n)
            .filter(|&t| s.sample(base.split(t)).unwrap().intersect(&b).is_empty())
            .count();
        let f = empty as f64 / n as f64;
        let sigma = (g * (1.0 - g) / n as f64).sqrt();
        assert!((f - g).abs() <= 3.0 * sigma, "{f} vs {g}");
    }

    fn chi_square_pvalue(k: &DppKernel, n: u64, seed: RngSeed) -> f64 {
        let pmf = exact_distribution(k).unwrap();
        let s = Sampler::new(k).unwrap();
        let mut counts = vec![0u64; pmf.probs().len()];
        for t in 0..n {
            counts[s.sample(seed.split(t)).unwrap().mask() as usize] += 1;
        }
        // pool cells with expected count < 5 into one bin
        let (mut stat, mut cells) = (0.0, 0usize);
        let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
        for (m, &p) in pmf.probs().iter().enumerate() {
            let e = p * n as f64;
            let o = counts[m] as f64;
            if e < 5.0 {
                pooled_obs += o;
                pooled_exp += e;
            } else {
                stat += (o - e).powi(2) / e;
                cells += 1;
            }
        }
        if pooled_exp > 0.0 {
            stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp.max(1e-300);
            cells += 1;
        }
        1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
    }

    #[test]
    fn sampler_matches_exact_law() {
        let strict = rand_kernel(43, 6);
        let p = chi_square_pvalue(&strict, 200_000, RngSeed::new(11, 0));
        assert!(p > 0.001, "strict contraction p-value {p}");
        let proj = rand_projection(44, 5, 2);
        let p = chi_square_pvalue(&proj, 200_000, RngSeed::new(12, 0));
        assert!(p > 0.001, "projection p-value {p}");
    }

    #[test]
    fn pmf_lift_and_condition() {
        let pmf = exact_distribution(&diag(&[0.2, 0.5])).unwrap();
        let lifted = pmf.lift(&[3, 1], 4).unwrap();
        assert!((lifted.prob(0b1000) - 0.2 * 0.5).abs() < 1e-15);
        assert!((lifted.prob(0b0010) - 0.8 * 0.5).abs() < 1e-15);
        let cond = lifted.condition(0b1000, 0b1000).unwrap();
        assert!((cond.prob(0b1010) - 0.5).abs() < 1e-15);
        assert!(lifted.condition(0b0001, 0b0001).is_err());
    }
}
