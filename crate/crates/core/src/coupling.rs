//! Monotone (Strassen) couplings on small ground sets.
//!
//! A coupling of `P_upper` and `P_lower` with `lower ⊆ upper` almost surely
//! is a feasible flow on
//!
//! ```text
//! source ─P_upper(A)→ A ─∞→ A′ (A′ ⊆ A) ─P_lower(A′)→ sink
//! ```
//!
//! of value 1. If the maximum flow falls short, the lower nodes unreachable
//! in the residual graph form an up-set `F` with `P_lower(F) > P_upper(F)`.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::DppKernel;
use crate::dpp::{exact_distribution, ConfigPmf, Configuration, Sampler};
use crate::error::{Error, Result};
use crate::palm::{palm_kernel, PalmTuple};
use crate::rng::RngSeed;

/// Masses below this are dropped before building the flow network.
pub const MASS_FLOOR: f64 = 1e-14;

/// Largest ground set for couplings (`3^m` subset pairs).
pub const MAX_COUPLING_SITES: usize = 8;

const FEASIBILITY_TOL: f64 = 1e-9;
const SMALLEST_SCALE: f64 = 1e-16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub upper: Configuration,
    pub lower: Configuration,
    pub mass: f64,
}

/// Joint law of `(A, A′)` with `A′ ⊆ A`; serializes as a list of entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CouplingTable {
    entries: Vec<CouplingEntry>,
    #[serde(skip)]
    ground: usize,
}

impl CouplingTable {
    pub fn entries(&self) -> &[CouplingEntry] {
        &self.entries
    }

    pub fn ground(&self) -> usize {
        self.ground
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    pub fn upper_marginal(&self) -> ConfigPmf {
        self.marginal(|e| e.upper.mask())
    }

    pub fn lower_marginal(&self) -> ConfigPmf {
        self.marginal(|e| e.lower.mask())
    }

    fn marginal(&self, pick: impl Fn(&CouplingEntry) -> u32) -> ConfigPmf {
        let mut probs = vec![0.0; 1 << self.ground];
        for e in &self.entries {
            probs[pick(e) as usize] += e.mass;
        }
        ConfigPmf::new(self.ground, probs).expect("ground set checked at construction")
    }

    /// `E[#A - #A′]`.
    pub fn expected_difference(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.mass * (e.upper.len() - e.lower.len()) as f64)
            .sum()
    }

    /// Support, mass and both marginals, each to `tol`.
    pub fn is_valid_for(&self, upper: &ConfigPmf, lower: &ConfigPmf, tol: f64) -> bool {
        self.entries
            .iter()
            .all(|e| e.mass >= 0.0 && e.lower.mask() & !e.upper.mask() == 0)
            && (self.total() - 1.0).abs() <= tol
            && self.upper_marginal().total_variation(upper) <= tol
            && self.lower_marginal().total_variation(lower) <= tol
    }
}

struct Edge {
    to: usize,
    cap: f64,
}

struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    /// Returns the index of the forward edge; its reverse is `index ^ 1`.
    fn add_edge(&mut self, from: usize, to: usize, cap: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap });
        self.edges.push(Edge { to: from, cap: 0.0 });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    fn bfs(&self, s: usize, threshold: f64) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.adj.len()];
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.edges[e].to;
                if !seen[v] && self.edges[e].cap >= threshold {
                    seen[v] = true;
                    parent[v] = Some(e);
                    queue.push_back(v);
                }
            }
        }
        parent
    }

    /// Augmenting paths restricted to residual capacity `≥ Δ`, halving `Δ`.
    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let largest = self
            .edges
            .iter()
            .map(|e| e.cap)
            .filter(|c| c.is_finite())
            .fold(0.0, f64::max);
        if largest <= 0.0 {
            return 0.0;
        }
        let mut delta = 2f64.powi(largest.log2().ceil() as i32);
        let mut flow = 0.0;
        while delta >= SMALLEST_SCALE {
            loop {
                let parent = self.bfs(s, delta);
                if parent[t].is_none() {
                    break;
                }
                let mut bottleneck = f64::INFINITY;
                let mut v = t;
                while let Some(e) = parent[v] {
                    bottleneck = bottleneck.min(self.edges[e].cap);
                    v = self.edges[e ^ 1].to;
                }
                let mut v = t;
                while let Some(e) = parent[v] {
                    self.edges[e].cap -= bottleneck;
                    self.edges[e ^ 1].cap += bottleneck;
                    v = self.edges[e ^ 1].to;
                }
                flow += bottleneck;
            }
            delta /= 2.0;
        }
        flow
    }

    fn reachable(&self, s: usize) -> Vec<bool> {
        let parent = self.bfs(s, SMALLEST_SCALE);
        let mut seen: Vec<bool> = parent.iter().map(Option::is_some).collect();
        seen[s] = true;
        seen
    }
}

/// Up-closure of a family of subsets of `{0..m}`.
fn up_closure(ground: usize, seeds: &[u32]) -> Vec<u32> {
    (0u32..1 << ground)
        .filter(|a| seeds.iter().any(|s| s & a == *s))
        .collect()
}

/// Find a monotone coupling of `upper` (dominating) and `lower`.
///
/// Fails with [`Error::DominationViolated`] carrying an up-set `F` and the
/// excess `P_lower(F) - P_upper(F)` when none exists.
pub fn monotone_coupling(upper: &ConfigPmf, lower: &ConfigPmf) -> Result<CouplingTable> {
    let m = upper.ground();
    if lower.ground() != m {
        return Err(Error::DimensionMismatch(format!(
            "coupling pmfs on {m} and {} sites",
            lower.ground()
        )));
    }
    if m > MAX_COUPLING_SITES {
        return Err(Error::GroundSetTooLarge {
            size: m,
            limit: MAX_COUPLING_SITES,
        });
    }
    let ups: Vec<(u32, f64)> = upper.iter().filter(|&(_, p)| p >= MASS_FLOOR).collect();
    let lows: Vec<(u32, f64)> = lower.iter().filter(|&(_, p)| p >= MASS_FLOOR).collect();
    let (s, t) = (0, 1);
    let up_node = |i: usize| 2 + i;
    let low_node = |j: usize| 2 + ups.len() + j;
    let mut net = FlowNetwork::new(2 + ups.len() + lows.len());
    let mut pair_edges = Vec::new();
    for (i, &(a, p)) in ups.iter().enumerate() {
        net.add_edge(s, up_node(i), p);
        for (j, &(b, _)) in lows.iter().enumerate() {
            if b & !a == 0 {
                let e = net.add_edge(up_node(i), low_node(j), f64::INFINITY);
                pair_edges.push((e, a, b));
            }
        }
    }
    for (j, &(_, p)) in lows.iter().enumerate() {
        net.add_edge(low_node(j), t, p);
    }
    let flow = net.max_flow(s, t);
    let target: f64 = lows.iter().map(|(_, p)| p).sum();
    if flow < target - FEASIBILITY_TOL {
        let seen = net.reachable(s);
        let unreached: Vec<u32> = lows
            .iter()
            .enumerate()
            .filter(|&(j, _)| !seen[low_node(j)])
            .map(|(_, &(b, _))| b)
            .collect();
        let certificate = up_closure(m, &unreached);
        let excess = certificate.iter().map(|&a| lower.prob(a) - upper.prob(a)).sum();
        return Err(Error::DominationViolated { certificate, excess });
    }
    let mut entries: Vec<CouplingEntry> = pair_edges
        .into_iter()
        .filter_map(|(e, a, b)| {
            // flow on a forward edge is the residual capacity of its reverse
            let mass = net.edges[e ^ 1].cap;
            (mass >= MASS_FLOOR).then(|| CouplingEntry {
                upper: Configuration::from_mask(a),
                lower: Configuration::from_mask(b),
                mass,
            })
        })
        .collect();
    entries.sort_by_key(|e| (e.upper.mask(), e.lower.mask()));
    Ok(CouplingTable { entries, ground: m })
}

/// Coupling of `DPP(K)` over `DPP(K^𝔭)`.
pub fn palm_coupling(k: &DppKernel, p: &PalmTuple) -> Result<CouplingTable> {
    let kp = palm_kernel(k, p)?;
    monotone_coupling(&exact_distribution(k)?, &exact_distribution(&kp)?)
}

/// One increasing functional and how the two laws compare on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalCheck {
    pub name: String,
    pub upper: f64,
    pub lower: f64,
    /// Allowed slack: `3σ` of the Monte Carlo difference, or `1e-9` when exact.
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub samples: usize,
    pub seed: RngSeed,
    pub trace_upper: f64,
    pub trace_lower: f64,
    pub monte_carlo: Vec<FunctionalCheck>,
    /// Present when the ground set is small enough to enumerate.
    pub exact: Option<Vec<FunctionalCheck>>,
    pub pass: bool,
}

/// Nested windows `{0..j}` used by the domination battery.
fn nested_windows(m: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (1..=8).map(|k| (m * k).div_ceil(8)).filter(|&s| s > 0).collect();
    sizes.dedup();
    sizes
}

type Functional = (String, Box<dyn Fn(&[usize]) -> f64 + Sync>);

fn battery(m: usize) -> Vec<Functional> {
    let mut out: Vec<Functional> = Vec::new();
    for j in nested_windows(m) {
        let count = move |a: &[usize]| a.iter().filter(|&&i| i < j).count() as f64;
        out.push((format!("count[0,{j})"), Box::new(count)));
        for t in [1usize, 2] {
            out.push((
                format!("count[0,{j})>={t}"),
                Box::new(move |a: &[usize]| f64::from(u8::from(count(a) >= t as f64))),
            ));
        }
    }
    out
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

/// Test `DPP(Kp) ≤ DPP(K)` on increasing functionals: nested-window counts
/// and count thresholds by Monte Carlo, and every up-set `{A ∩ S ≠ ∅}`
/// exactly when `m ≤ 8`.
pub fn domination_check(k: &DppKernel, kp: &DppKernel, samples: usize, seed: RngSeed) -> Result<DominationReport> {
    let m = k.size();
    if kp.size() != m {
        return Err(Error::DimensionMismatch(format!(
            "kernels on {m} and {} sites",
            kp.size()
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("domination check needs at least two samples".into()));
    }
    let (su, sl) = (Sampler::new(k)?, Sampler::new(kp)?);
    let draws: Vec<(Configuration, Configuration)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let stream = seed.split(i);
            Ok((su.sample(stream.split(0))?, sl.sample(stream.split(1))?))
        })
        .collect::<Result<_>>()?;
    let monte_carlo = battery(m)
        .into_iter()
        .map(|(name, f)| {
            let fu: Vec<f64> = draws.iter().map(|(a, _)| f(a.indices())).collect();
            let fl: Vec<f64> = draws.iter().map(|(_, b)| f(b.indices())).collect();
            let ((mu, vu), (ml, vl)) = (mean_var(&fu), mean_var(&fl));
            let slack = 3.0 * ((vu + vl) / samples as f64).sqrt();
            FunctionalCheck {
                name,
                upper: mu,
                lower: ml,
                slack,
                pass: ml <= mu + slack,
            }
        })
        .collect::<Vec<_>>();
    let exact = if m <= MAX_COUPLING_SITES {
        let (pu, pl) = (exact_distribution(k)?, exact_distribution(kp)?);
        Some(
            (1u32..1 << m)
                .map(|s| {
                    let (u, l) = (1.0 - pu.avoidance(s), 1.0 - pl.avoidance(s));
                    FunctionalCheck {
                        name: format!("hits{:?}", Configuration::from_mask(s).indices()),
                        upper: u,
                        lower: l,
                        slack: FEASIBILITY_TOL,
                        pass: l <= u + FEASIBILITY_TOL,
                    }
                })
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let (trace_upper, trace_lower) = (k.trace(), kp.trace());
    let pass = trace_lower <= trace_upper + FEASIBILITY_TOL
        && monte_carlo.iter().all(|c| c.pass)
        && exact.as_ref().is_none_or(|e| e.iter().all(|c| c.pass));
    Ok(DominationReport {
        samples,
        seed,
        trace_upper,
        trace_lower,
        monte_carlo,
        exact,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceBoundReport {
    /// `E[#A - #A′]` under the coupling.
    pub expected_difference: f64,
    /// `tr K - tr K^𝔭`.
    pub trace_gap: f64,
    /// `tr(K - K^𝔭)`.
    pub trace_of_difference: f64,
    pub coupling_valid: bool,
    pub pass: bool,
}

/// Check `E[#A - #A′] = tr K - tr K^𝔭` and `E[#A - #A′] ≤ tr(K - K^𝔭)`
/// on a coupling of `DPP(K)` over `DPP(K^𝔭)`.
pub fn difference_trace_bound(k: &DppKernel, p: &PalmTuple, coupling: &CouplingTable) -> Result<TraceBoundReport> {
    let kp = palm_kernel(k, p)?;
    let coupling_valid = coupling.ground() == k.size()
        && coupling.is_valid_for(&exact_distribution(k)?, &exact_distribution(&kp)?, FEASIBILITY_TOL);
    let expected_difference = coupling.expected_difference();
    let trace_gap = k.trace() - kp.trace();
    let trace_of_difference = k.matrix().sub(kp.matrix()).trace().re;
    let pass = coupling_valid
        && (expected_difference - trace_gap).abs() <= FEASIBILITY_TOL
        && expected_difference <= trace_of_difference + FEASIBILITY_TOL;
    Ok(TraceBoundReport {
        expected_difference,
        trace_gap,
        trace_of_difference,
        coupling_valid,
        pass,
    })
}
