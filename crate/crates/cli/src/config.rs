//! Flat `key = value` experiment configuration.
//!
//! Keys use dotted sections (`domain.alpha = 0.5`); `#` starts a comment;
//! values may be wrapped in double quotes. Unknown, duplicate or
//! inapplicable keys are rejected with the offending line number.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use bergman_dpp::DomainSpec;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelMode {
    /// Bergman kernel sampled on the quadrature grid.
    Quadrature,
    /// Projection onto the first `basis_rank` orthonormalized monomials (disk only).
    Basis,
    /// Seeded random strict contraction on `kernel.sites` sites.
    Random,
    /// Zero kernel on the grid.
    Empty,
}

impl KernelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Quadrature => "quadrature",
            Self::Basis => "basis",
            Self::Random => "random",
            Self::Empty => "empty",
        }
    }

    pub fn uses_grid(self) -> bool {
        self != Self::Random
    }
}

impl FromStr for KernelMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quadrature" => Ok(Self::Quadrature),
            "basis" => Ok(Self::Basis),
            "random" => Ok(Self::Random),
            "empty" => Ok(Self::Empty),
            _ => Err(format!("unknown kernel mode `{s}` (quadrature, basis, random, empty)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProbeKind {
    Deletion,
    Insertion,
    PalmOracle,
    ConditionalOracle,
    Coupling,
    Domination,
    TraceBound,
    Gaf,
    AnnulusCheck,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 9] = [
        Self::Deletion,
        Self::Insertion,
        Self::PalmOracle,
        Self::ConditionalOracle,
        Self::Coupling,
        Self::Domination,
        Self::TraceBound,
        Self::Gaf,
        Self::AnnulusCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Deletion => "deletion",
            Self::Insertion => "insertion",
            Self::PalmOracle => "palm-oracle",
            Self::ConditionalOracle => "conditional-oracle",
            Self::Coupling => "coupling",
            Self::Domination => "domination",
            Self::TraceBound => "trace-bound",
            Self::Gaf => "gaf",
            Self::AnnulusCheck => "annulus-check",
        }
    }
}

impl FromStr for ProbeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|k| k.as_str()).collect();
                format!("unknown probe `{s}` ({})", names.join(", "))
            })
    }
}

/// Declarative choice of a set of sites.
#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    /// Sites whose grid point satisfies `|z| < r`.
    DiskRadius(f64),
    /// Explicit site indices.
    Indices(Vec<usize>),
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DiskRadius(r) => write!(f, "disk_radius < {r}"),
            Self::Indices(v) => f.write_str(&join_indices(v)),
        }
    }
}

impl FromStr for Selection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(rest) = s.strip_prefix("disk_radius") {
            let r = rest
                .trim_start()
                .strip_prefix('<')
                .ok_or_else(|| format!("expected `disk_radius < r`, got `{s}`"))?;
            let r: f64 = r.trim().parse().map_err(|_| format!("bad radius in `{s}`"))?;
            if !(r > 0.0) {
                return Err(format!("radius must be positive in `{s}`"));
            }
            return Ok(Self::DiskRadius(r));
        }
        parse_indices(s).map(Self::Indices)
    }
}

fn join_indices(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
}

/// Comma-separated indices; `a..b` expands to the half-open range.
pub fn parse_indices(s: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| format!("bad range `{part}`"))?;
            let b: usize = b.trim().parse().map_err(|_| format!("bad range `{part}`"))?;
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| format!("bad index `{part}`"))?);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    fn as_str(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
            Self::Svg => "svg",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub resolution: usize,
    pub inset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelConfig {
    pub mode: KernelMode,
    pub basis_rank: usize,
    pub clamp_delta: f64,
    pub sites: usize,
    pub restrict: Option<Selection>,
    /// Zero the rows and columns of `probe.b` (the non-insertion-tolerant construction).
    pub zero_block: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub kind: Option<ProbeKind>,
    pub b: Option<Selection>,
    pub palm: Vec<usize>,
    pub window: Option<Selection>,
    pub exterior: Vec<usize>,
    pub samples: usize,
    pub instances: usize,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GafConfig {
    pub terms: usize,
    pub radius: f64,
    pub bins: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub formats: BTreeSet<Format>,
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub domain: DomainSpec,
    pub grid: GridConfig,
    pub kernel: KernelConfig,
    pub samples: usize,
    pub probe: ProbeConfig,
    pub gaf: GafConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            domain: DomainSpec::Disk { alpha: 0.0 },
            grid: GridConfig {
                resolution: 16,
                inset: 0.15,
            },
            kernel: KernelConfig {
                mode: KernelMode::Quadrature,
                basis_rank: 16,
                clamp_delta: 1e-6,
                sites: 6,
                restrict: None,
                zero_block: false,
            },
            samples: 100,
            probe: ProbeConfig {
                kind: None,
                b: None,
                palm: Vec::new(),
                window: None,
                exterior: Vec::new(),
                samples: 200,
                instances: 1,
                pairs: 50,
            },
            gaf: GafConfig {
                terms: 120,
                radius: 0.8,
                bins: 8,
                trials: 10_000,
            },
            output: OutputConfig {
                dir: None,
                formats: [Format::Csv, Format::Json].into_iter().collect(),
            },
        }
    }
}

const KEYS: &[&str] = &[
    "seed",
    "domain.kind",
    "domain.alpha",
    "domain.rho",
    "domain.d",
    "grid.resolution",
    "grid.inset",
    "kernel.mode",
    "kernel.basis_rank",
    "kernel.clamp_delta",
    "kernel.sites",
    "kernel.restrict",
    "kernel.zero_block",
    "sample.count",
    "probe.kind",
    "probe.b",
    "probe.palm",
    "probe.window",
    "probe.exterior",
    "probe.samples",
    "probe.instances",
    "probe.pairs",
    "gaf.terms",
    "gaf.radius",
    "gaf.bins",
    "gaf.trials",
    "output.dir",
    "output.formats",
];

struct Entry {
    line: usize,
    value: String,
}

struct Raw {
    entries: BTreeMap<String, Entry>,
}

impl Raw {
    fn take<T>(&mut self, key: &str, parse: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, CliError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .map_err(|m| CliError::config(Some(e.line), format!("{key}: {m}"))),
        }
    }

    fn take_num<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        self.take(key, |v| v.parse::<T>().map_err(|_| format!("cannot parse `{v}`")))
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::config(Some(line), format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            let mut value = value.trim();
            if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
                value = &value[1..value.len() - 1];
            }
            if !KEYS.contains(&key) {
                return Err(CliError::config(Some(line), format!("unknown key `{key}`")));
            }
            let prev = entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.to_string(),
                },
            );
            if let Some(prev) = prev {
                return Err(CliError::config(
                    Some(line),
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
        }
        let mut raw = Raw { entries };
        let mut cfg = ExperimentConfig::default();

        if let Some(s) = raw.take_num("seed")? {
            cfg.seed = s;
        }
        let kind = raw.take("domain.kind", |v| Ok(v.to_string()))?.unwrap_or_else(|| "disk".into());
        let alpha_line = raw.entries.get("domain.alpha").map(|e| e.line);
        let rho_line = raw.entries.get("domain.rho").map(|e| e.line);
        let d_line = raw.entries.get("domain.d").map(|e| e.line);
        let alpha: Option<f64> = raw.take_num("domain.alpha")?;
        let rho: Option<f64> = raw.take_num("domain.rho")?;
        let d: Option<usize> = raw.take_num("domain.d")?;
        let inapplicable = |key: &str, line: Option<usize>| {
            CliError::config(line, format!("`{key}` does not apply to domain.kind = {kind}"))
        };
        cfg.domain = match kind.as_str() {
            "disk" => {
                if rho.is_some() {
                    return Err(inapplicable("domain.rho", rho_line));
                }
                if d.is_some() {
                    return Err(inapplicable("domain.d", d_line));
                }
                DomainSpec::Disk { alpha: alpha.unwrap_or(0.0) }
            }
            "annulus" => {
                if alpha.is_some() {
                    return Err(inapplicable("domain.alpha", alpha_line));
                }
                if d.is_some() {
                    return Err(inapplicable("domain.d", d_line));
                }
                DomainSpec::Annulus { rho: rho.unwrap_or(0.5) }
            }
            "polydisk" | "ball" => {
                if alpha.is_some() {
                    return Err(inapplicable("domain.alpha", alpha_line));
                }
                if rho.is_some() {
                    return Err(inapplicable("domain.rho", rho_line));
                }
                let d = d.unwrap_or(2);
                if kind == "ball" {
                    DomainSpec::Ball { d }
                } else {
                    DomainSpec::Polydisk { d }
                }
            }
            other => {
                return Err(CliError::config(
                    None,
                    format!("unknown domain.kind `{other}` (disk, annulus, polydisk, ball)"),
                ))
            }
        };
        cfg.domain
            .validate()
            .map_err(|e| CliError::config(alpha_line.or(rho_line).or(d_line), e.to_string()))?;

        if let Some(v) = raw.take_num("grid.resolution")? {
            cfg.grid.resolution = v;
        }
        if let Some(v) = raw.take_num("grid.inset")? {
            cfg.grid.inset = v;
        }
        if let Some(v) = raw.take("kernel.mode", KernelMode::from_str)? {
            cfg.kernel.mode = v;
        }
        if let Some(v) = raw.take_num("kernel.basis_rank")? {
            cfg.kernel.basis_rank = v;
        }
        if let Some(v) = raw.take_num("kernel.clamp_delta")? {
            cfg.kernel.clamp_delta = v;
        }
        if let Some(v) = raw.take_num("kernel.sites")? {
            cfg.kernel.sites = v;
        }
        cfg.kernel.restrict = raw.take("kernel.restrict", Selection::from_str)?;
        if let Some(v) = raw.take("kernel.zero_block", parse_bool)? {
            cfg.kernel.zero_block = v;
        }
        if let Some(v) = raw.take_num("sample.count")? {
            cfg.samples = v;
        }
        cfg.probe.kind = raw.take("probe.kind", ProbeKind::from_str)?;
        cfg.probe.b = raw.take("probe.b", Selection::from_str)?;
        if let Some(v) = raw.take("probe.palm", parse_indices)? {
            cfg.probe.palm = v;
        }
        cfg.probe.window = raw.take("probe.window", Selection::from_str)?;
        if let Some(v) = raw.take("probe.exterior", parse_indices)? {
            cfg.probe.exterior = v;
        }
        if let Some(v) = raw.take_num("probe.samples")? {
            cfg.probe.samples = v;
        }
        if let Some(v) = raw.take_num("probe.instances")? {
            cfg.probe.instances = v;
        }
        if let Some(v) = raw.take_num("probe.pairs")? {
            cfg.probe.pairs = v;
        }
        if let Some(v) = raw.take_num("gaf.terms")? {
            cfg.gaf.terms = v;
        }
        if let Some(v) = raw.take_num("gaf.radius")? {
            cfg.gaf.radius = v;
        }
        if let Some(v) = raw.take_num("gaf.bins")? {
            cfg.gaf.bins = v;
        }
        if let Some(v) = raw.take_num("gaf.trials")? {
            cfg.gaf.trials = v;
        }
        cfg.output.dir = raw.take("output.dir", |v| Ok(PathBuf::from(v)))?;
        if let Some(v) = raw.take("output.formats", |v| {
            v.split(',')
                .map(str::trim)
                .filter(|f| !f.is_empty())
                .map(|f| match f {
                    "csv" => Ok(Format::Csv),
                    "json" => Ok(Format::Json),
                    "svg" => Ok(Format::Svg),
                    _ => Err(format!("unknown format `{f}` (csv, json, svg)")),
                })
                .collect::<Result<BTreeSet<_>, _>>()
        })? {
            cfg.output.formats = v;
        }
        debug_assert!(raw.entries.is_empty(), "every known key is consumed");
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::config(None, m));
        if self.kernel.mode.uses_grid() && self.grid.resolution < 2 {
            return bad(format!("grid.resolution = {} is below 2", self.grid.resolution));
        }
        if !(0.0..1.0).contains(&self.grid.inset) {
            return bad(format!("grid.inset = {} outside [0, 1)", self.grid.inset));
        }
        if self.kernel.mode == KernelMode::Basis && !matches!(self.domain, DomainSpec::Disk { .. }) {
            return bad("kernel.mode = basis is only available on the disk".into());
        }
        if self.kernel.mode == KernelMode::Random && self.kernel.sites == 0 {
            return bad("kernel.sites must be positive".into());
        }
        if self.kernel.zero_block && self.probe.b.is_none() {
            return bad("kernel.zero_block needs probe.b".into());
        }
        if self.probe.instances == 0 {
            return bad("probe.instances must be positive".into());
        }
        Ok(())
    }

    /// The configuration with every default spelled out, in the same format.
    pub fn resolved(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("seed", self.seed.to_string());
        match self.domain {
            DomainSpec::Disk { alpha } => {
                put("domain.kind", "disk".into());
                put("domain.alpha", alpha.to_string());
            }
            DomainSpec::Annulus { rho } => {
                put("domain.kind", "annulus".into());
                put("domain.rho", rho.to_string());
            }
            DomainSpec::Polydisk { d } => {
                put("domain.kind", "polydisk".into());
                put("domain.d", d.to_string());
            }
            DomainSpec::Ball { d } => {
                put("domain.kind", "ball".into());
                put("domain.d", d.to_string());
            }
        }
        put("grid.resolution", self.grid.resolution.to_string());
        put("grid.inset", self.grid.inset.to_string());
        put("kernel.mode", self.kernel.mode.as_str().into());
        put("kernel.basis_rank", self.kernel.basis_rank.to_string());
        put("kernel.clamp_delta", self.kernel.clamp_delta.to_string());
        put("kernel.sites", self.kernel.sites.to_string());
        if let Some(r) = &self.kernel.restrict {
            put("kernel.restrict", format!("\"{r}\""));
        }
        put("kernel.zero_block", self.kernel.zero_block.to_string());
        put("sample.count", self.samples.to_string());
        if let Some(k) = self.probe.kind {
            put("probe.kind", k.as_str().into());
        }
        if let Some(b) = &self.probe.b {
            put("probe.b", format!("\"{b}\""));
        }
        if !self.probe.palm.is_empty() {
            put("probe.palm", join_indices(&self.probe.palm));
        }
        if let Some(w) = &self.probe.window {
            put("probe.window", format!("\"{w}\""));
        }
        if !self.probe.exterior.is_empty() {
            put("probe.exterior", join_indices(&self.probe.exterior));
        }
        put("probe.samples", self.probe.samples.to_string());
        put("probe.instances", self.probe.instances.to_string());
        put("probe.pairs", self.probe.pairs.to_string());
        put("gaf.terms", self.gaf.terms.to_string());
        put("gaf.radius", self.gaf.radius.to_string());
        put("gaf.bins", self.gaf.bins.to_string());
        put("gaf.trials", self.gaf.trials.to_string());
        let formats: Vec<&str> = self.output.formats.iter().map(|f| f.as_str()).collect();
        put("output.formats", formats.join(", "));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_line(text: &str) -> Option<usize> {
        match ExperimentConfig::parse(text) {
            Err(CliError::Config { line, .. }) => line,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn full_parse() {
        let text = "\
# deletion probe on the weighted disk
seed = 7
domain.kind = disk
domain.alpha = 1
grid.resolution = 16   # sites = 16^2
probe.kind = deletion
probe.b = \"disk_radius < 0.3\"
probe.palm = 0, 3..5
output.formats = json, svg
";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.domain, DomainSpec::Disk { alpha: 1.0 });
        assert_eq!(c.probe.kind, Some(ProbeKind::Deletion));
        assert_eq!(c.probe.b, Some(Selection::DiskRadius(0.3)));
        assert_eq!(c.probe.palm, vec![0, 3, 4]);
        assert!(c.output.wants(Format::Svg) && !c.output.wants(Format::Csv));
    }

    #[test]
    fn diagnostics_carry_lines() {
        assert_eq!(err_line("seed = 1\nfoo.bar = 2\n"), Some(2));
        assert_eq!(err_line("seed = 1\n\nseed = 2\n"), Some(3));
        assert_eq!(err_line("seed = x\n"), Some(1));
        assert_eq!(err_line("# c\nnot a pair\n"), Some(2));
        assert_eq!(err_line("domain.kind = annulus\ndomain.alpha = 1\n"), Some(2));
        assert_eq!(err_line("probe.kind = sideways\n"), Some(1));
    }

    #[test]
    fn semantic_errors() {
        assert!(ExperimentConfig::parse("domain.kind = annulus\nkernel.mode = basis\n").is_err());
        assert!(ExperimentConfig::parse("domain.kind = annulus\ndomain.rho = 1.5\n").is_err());
        assert!(ExperimentConfig::parse("kernel.zero_block = true\n").is_err());
        assert!(ExperimentConfig::parse("probe.b = disk_radius > 0.3\n").is_err());
    }

    #[test]
    fn resolved_round_trips() {
        let text = "seed = 3\ndomain.kind = annulus\ndomain.rho = 0.7\nprobe.kind = annulus-check\nprobe.b = \"disk_radius < 0.25\"\nkernel.restrict = 0..4\nprobe.exterior = 5\n";
        let c = ExperimentConfig::parse(text).unwrap();
        let again = ExperimentConfig::parse(&c.resolved()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.resolved(), c.resolved());
    }

    #[test]
    fn selections() {
        assert_eq!("1, 2,5".parse::<Selection>().unwrap(), Selection::Indices(vec![1, 2, 5]));
        assert_eq!("disk_radius<0.5".parse::<Selection>().unwrap(), Selection::DiskRadius(0.5));
        assert!("disk_radius < -1".parse::<Selection>().is_err());
        assert!(parse_indices("1..x").is_err());
    }
}
