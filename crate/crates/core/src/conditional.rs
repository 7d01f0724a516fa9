//! Conditional kernels given the configuration outside a window, and the
//! probes built on them.
//!
//! With `D = W^c` and `K' = K^{𝔛∩D}` (the reduced Palm kernel at the frozen
//! exterior), the conditional law on `W` is `DPP(Kcond)` with
//!
//! ```text
//! Kcond = χ_W K' (1 - χ_D K')^{-1} χ_W = K'_WW + K'_WD (I - K'_DD)^{-1} K'_DW.
//! ```
//!
//! The resolvent is applied by a direct solve.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::DppKernel;
use crate::dpp::{exact_distribution, mask, ConfigPmf, Configuration, Sampler};
use crate::error::{Error, Result};
use crate::numerics::{fredholm_from_spectrum, hermitian_eig, solve, ComplexMatrix, HermitianEig};
use crate::palm::{iterated_schur, PalmTuple};
use crate::rng::RngSeed;

/// Smallest singular value of `I - K'_DD` accepted by [`conditional_kernel`].
pub const RESOLVENT_FLOOR: f64 = 1e-10;

/// Spectral slack tolerated on an assembled conditional kernel before it is
/// clamped back into `[0, 1]`.
pub const CONDITIONAL_SLACK: f64 = 1e-9;

/// Probe PASS/FAIL margin.
pub const PROBE_THRESHOLD: f64 = 1e-9;

fn check_window(m: usize, w: &[usize]) -> Result<Vec<bool>> {
    let mut inside = vec![false; m];
    for &i in w {
        if i >= m {
            return Err(Error::InvalidParameter(format!(
                "window site {i} outside ground set of size {m}"
            )));
        }
        if inside[i] {
            return Err(Error::InvalidParameter(format!("window site {i} repeated")));
        }
        inside[i] = true;
    }
    Ok(inside)
}

/// Kernel of `DPP(K)` on `W` conditioned on `𝔛 ∩ W^c = exterior`.
///
/// Row `i` of the result stands for site `W[i]`; labels are composed with
/// those of `K`. Projection inputs give projection-flagged outputs.
pub fn conditional_kernel(k: &DppKernel, w: &[usize], exterior: &Configuration) -> Result<DppKernel> {
    let m = k.size();
    let inside = check_window(m, w)?;
    if let Some(&bad) = exterior.indices().iter().find(|&&i| i >= m || inside[i]) {
        return Err(Error::InvalidParameter(format!(
            "exterior site {bad} is not in the complement of the window"
        )));
    }
    let palm;
    let kp = if exterior.is_empty() {
        k
    } else {
        palm = iterated_schur(k, &PalmTuple::new(exterior.indices().to_vec())?)?;
        &palm
    };
    let d: Vec<usize> = (0..m).filter(|&i| !inside[i]).collect();
    let kww = kp.matrix().principal(w);
    let assembled = if d.is_empty() || w.is_empty() {
        kww
    } else {
        let kdd = kp.matrix().principal(&d);
        // K' ≤ K in the PSD order, so 1 - λ_max(K) bounds σ_min(I - K'_DD)
        // from below for a strict contraction; fall back to the exact value.
        let mut sigma = if k.is_projection() { 0.0 } else { 1.0 - k.lambda_max()? };
        if sigma <= RESOLVENT_FLOOR {
            sigma = 1.0 - hermitian_eig(&kdd)?.max();
        }
        if sigma <= RESOLVENT_FLOOR {
            return Err(Error::SingularResolvent(sigma));
        }
        let resolvent = ComplexMatrix::identity(d.len()).sub(&kdd);
        let x = solve(&resolvent, &kp.matrix().select(&d, w))?;
        kww.add(&kp.matrix().select(w, &d).matmul(&x))
    }
    .symmetrize();
    let labels = w.iter().map(|&i| k.label(i)).collect();
    if assembled.rows() == 0 {
        return Ok(DppKernel::trusted(assembled, Some(labels), k.is_projection()));
    }
    let mut eig = hermitian_eig(&assembled)?;
    let (lo, hi) = (eig.min(), eig.max());
    if lo < -CONDITIONAL_SLACK || hi > 1.0 + CONDITIONAL_SLACK {
        return Err(Error::SpectrumOutOfRange { min: lo, max: hi });
    }
    let matrix = if lo < 0.0 || hi > 1.0 {
        let clamped = eig.map_spectrum(|l| l.clamp(0.0, 1.0));
        eig = HermitianEig {
            values: eig.values.iter().map(|l| l.clamp(0.0, 1.0)).collect(),
            vectors: eig.vectors,
        };
        clamped
    } else {
        assembled
    };
    Ok(DppKernel::trusted_with_eig(matrix, Some(labels), k.is_projection(), eig))
}

/// Brute-force conditional law: condition the exact law on
/// `A ∩ W^c = exterior` and read off `A ∩ W`. Site `i` of the result is
/// `W[i]`.
pub fn conditional_oracle(k: &DppKernel, w: &[usize], exterior: &Configuration) -> Result<ConfigPmf> {
    let m = k.size();
    if m > 10 {
        return Err(Error::GroundSetTooLarge { size: m, limit: 10 });
    }
    let inside = check_window(m, w)?;
    let wmask = mask(w, m)?;
    let outside = !wmask & ((1u32 << m) - 1);
    let pattern = mask(exterior.indices(), m)?;
    if pattern & wmask != 0 {
        return Err(Error::InvalidParameter(
            "exterior configuration meets the window".into(),
        ));
    }
    debug_assert_eq!(inside.iter().filter(|&&b| b).count(), w.len());
    let cond = exact_distribution(k)?.condition(outside, pattern)?;
    let mut local = vec![0.0; 1 << w.len()];
    for (a, p) in cond.iter() {
        if p == 0.0 {
            continue;
        }
        let idx = w
            .iter()
            .enumerate()
            .filter(|(_, &site)| a >> site & 1 == 1)
            .fold(0usize, |acc, (j, _)| acc | 1 << j);
        local[idx] += p;
    }
    ConfigPmf::new(w.len(), local)
}

/// `P(𝔛 = A | #𝔛 = n)` under `DPP(Kcond)`.
pub fn diffusive_density(kcond: &DppKernel, n: usize, a: &Configuration) -> Result<f64> {
    if a.len() != n {
        return Err(Error::InvalidParameter(format!(
            "configuration has {} points, expected {n}",
            a.len()
        )));
    }
    let law = exact_distribution(kcond)?;
    let pn = law.cardinality().get(n).copied().unwrap_or(0.0);
    if pn < 1e-12 {
        return Err(Error::ZeroProbability(pn));
    }
    Ok(law.prob(mask(a.indices(), kcond.size())?) / pn)
}

/// Compression of `K` onto `B^c`: the rows and columns of `B` are zeroed.
///
/// Conditioned on the exterior, no point can ever appear in `B`, so such a
/// kernel is not number insertion tolerant.
pub fn block_zero_kernel(k: &DppKernel, b: &[usize]) -> Result<DppKernel> {
    let inside = check_window(k.size(), b)?;
    let mut mat = k.matrix().clone();
    for i in 0..k.size() {
        for j in 0..k.size() {
            if inside[i] || inside[j] {
                mat[(i, j)] = Default::default();
            }
        }
    }
    let labels = (0..k.size()).map(|i| k.label(i)).collect();
    Ok(DppKernel::trusted(mat, Some(labels), false))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Summary of a conditioning probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub samples: usize,
    pub min_gap: f64,
    pub max_lambda: f64,
    /// Smallest `P(#_B > 0 | exterior) = 1 - gap`.
    pub min_insertion: f64,
    pub trace_stats: TraceStats,
    /// Conditionings whose resolvent was singular (reported, not perturbed).
    pub singular_events: usize,
    pub pass: bool,
    pub seed: RngSeed,
}

/// What one sampled conditioning looked like.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Observation {
    pub gap: f64,
    pub lambda_max: f64,
    pub trace: f64,
    pub singular: bool,
}

/// Sample `samples` configurations of `DPP(K)`, freeze each outside `B` and
/// describe the conditional kernel on `B`. Sample `i` uses `seed.split(i)`.
pub fn observe_conditionings(
    k: &DppKernel,
    b: &[usize],
    samples: usize,
    seed: RngSeed,
) -> Result<Vec<Observation>> {
    if b.is_empty() {
        return Err(Error::InvalidParameter("probe window B is empty".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("probe needs at least one sample".into()));
    }
    let inside = check_window(k.size(), b)?;
    let sampler = Sampler::new(k)?;
    if !k.is_projection() {
        k.lambda_max()?;
    }
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let x = sampler.sample(seed.split(i))?;
            let exterior: Vec<usize> = x.indices().iter().copied().filter(|&s| !inside[s]).collect();
            let exterior = Configuration::new(exterior, k.size())?;
            match conditional_kernel(k, b, &exterior) {
                Ok(kc) => Ok(Observation {
                    gap: fredholm_from_spectrum(&kc.eig()?.values)?,
                    lambda_max: kc.lambda_max()?,
                    trace: kc.trace(),
                    singular: false,
                }),
                Err(Error::SingularResolvent(_)) => Ok(Observation {
                    gap: 0.0,
                    lambda_max: 1.0,
                    trace: f64::NAN,
                    singular: true,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

fn summarize(obs: &[Observation], seed: RngSeed, pass: impl Fn(&ProbeReport) -> bool) -> ProbeReport {
    let regular: Vec<&Observation> = obs.iter().filter(|o| !o.singular).collect();
    let traces: Vec<f64> = regular.iter().map(|o| o.trace).collect();
    let trace_stats = if traces.is_empty() {
        TraceStats { min: 0.0, max: 0.0, mean: 0.0 }
    } else {
        TraceStats {
            min: traces.iter().copied().fold(f64::INFINITY, f64::min),
            max: traces.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: traces.iter().sum::<f64>() / traces.len() as f64,
        }
    };
    let mut report = ProbeReport {
        samples: obs.len(),
        min_gap: obs.iter().map(|o| o.gap).fold(f64::INFINITY, f64::min),
        max_lambda: obs.iter().map(|o| o.lambda_max).fold(f64::NEG_INFINITY, f64::max),
        min_insertion: obs.iter().map(|o| 1.0 - o.gap).fold(f64::INFINITY, f64::min),
        trace_stats,
        singular_events: obs.len() - regular.len(),
        pass: false,
        seed,
    };
    report.pass = report.singular_events == 0 && pass(&report);
    report
}

/// Deletion verdict: PASS iff every gap is positive and every `λ_max`
/// stays below `1 - 1e-9`.
pub fn deletion_report(obs: &[Observation], seed: RngSeed) -> ProbeReport {
    summarize(obs, seed, |r| r.min_gap > 0.0 && r.max_lambda < 1.0 - PROBE_THRESHOLD)
}

/// Insertion verdict: PASS iff every conditional trace exceeds 1e-9.
pub fn insertion_report(obs: &[Observation], seed: RngSeed) -> ProbeReport {
    summarize(obs, seed, |r| r.trace_stats.min > PROBE_THRESHOLD)
}

/// Deletion tolerance: every conditional kernel on `B` must be a strict
/// contraction, i.e. an empty `B` keeps positive conditional probability.
pub fn deletion_tolerance_probe(k: &DppKernel, b: &[usize], samples: usize, seed: RngSeed) -> Result<ProbeReport> {
    Ok(deletion_report(&observe_conditionings(k, b, samples, seed)?, seed))
}

/// Number insertion tolerance: every conditional kernel on `B` must be
/// nonzero, so at least one point in `B` keeps positive probability.
pub fn number_insertion_probe(k: &DppKernel, b: &[usize], samples: usize, seed: RngSeed) -> Result<ProbeReport> {
    Ok(insertion_report(&observe_conditionings(k, b, samples, seed)?, seed))
}
