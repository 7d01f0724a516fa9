//! `sample`, `probe` and `report`.

use std::path::{Path, PathBuf};

use bergman_dpp::conditional::{
    conditional_kernel, conditional_oracle, deletion_report, insertion_report, observe_conditionings,
};
use bergman_dpp::coupling::{difference_trace_bound, domination_check, palm_coupling, MAX_COUPLING_SITES};
use bergman_dpp::dpp::exact_distribution;
use bergman_dpp::gaf::{intensity_compare, sample_zero_set};
use bergman_dpp::kernels::annulus_cross_check;
use bergman_dpp::palm::{palm_distribution_oracle, palm_kernel};
use bergman_dpp::{Configuration, DomainSpec, Error, PalmTuple, RngSeed, Sampler};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::build::{build, check_indices, Built};
use crate::config::{ExperimentConfig, Format, ProbeKind};
use crate::error::CliError;
use crate::output::{csv_bytes, num, scatter_svg, to_sorted_value, write_atomic, write_json};

/// Name of the resolved configuration written into every output directory.
pub const RESOLVED_CONFIG: &str = "resolved.conf";
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.md";

/// Oracle tolerance on total variation.
pub const ORACLE_TV: f64 = 1e-8;
const ORACLE_SITES: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

fn version_line() -> String {
    format!("# bergman-dpp {}\n", bergman_dpp::VERSION)
}

fn write_resolved(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let text = version_line() + &cfg.resolved();
    write_atomic(&out.join(RESOLVED_CONFIG), text.as_bytes())
}

fn coords_header(built: &Built) -> Vec<String> {
    match built.grid.as_ref().map(|g| g.spec.dim()) {
        None => Vec::new(),
        Some(1) => vec!["x".into(), "y".into()],
        Some(d) => (1..=d).flat_map(|j| [format!("x{j}"), format!("y{j}")]).collect(),
    }
}

fn coords(built: &Built, site: usize) -> Vec<String> {
    built.point(site).map_or_else(Vec::new, |p| {
        p.coords.iter().flat_map(|z| [num(z.re), num(z.im)]).collect()
    })
}

fn reference_circles(spec: &DomainSpec) -> Vec<f64> {
    match spec {
        DomainSpec::Annulus { rho } => vec![*rho, 1.0],
        _ => vec![1.0],
    }
}

/// Draw `sample.count` configurations.
pub fn sample(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let built = build(cfg, 0)?;
    let sampler = Sampler::new(&built.kernel)?;
    let base = RngSeed::new(cfg.seed, 0);
    let configs: Vec<Configuration> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| sampler.sample(base.split(i)))
        .collect::<Result<_, Error>>()?;
    let total: usize = configs.iter().map(Configuration::len).sum();
    let mean = if configs.is_empty() { 0.0 } else { total as f64 / configs.len() as f64 };
    write_resolved(cfg, out)?;
    if cfg.output.wants(Format::Json) {
        write_json(
            &out.join("configurations.json"),
            &json!({
                "version": bergman_dpp::VERSION,
                "seed": cfg.seed,
                "sites": built.kernel.size(),
                "kernel_trace": built.kernel.trace(),
                "clamp_moved": built.clamp_moved,
                "count": configs.len(),
                "mean_count": mean,
                "configurations": configs,
            }),
        )?;
    }
    if cfg.output.wants(Format::Csv) {
        let mut header = vec!["sample".to_string(), "site".to_string()];
        header.extend(coords_header(&built));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = configs.iter().enumerate().flat_map(|(i, c)| {
            c.indices().iter().map(move |&s| (i, s)).collect::<Vec<_>>()
        });
        let rows: Vec<Vec<String>> = rows
            .map(|(i, s)| {
                let mut r = vec![i.to_string(), built.kernel.label(s).to_string()];
                r.extend(coords(&built, s));
                r
            })
            .collect();
        write_atomic(&out.join("points.csv"), &csv_bytes(&header, rows)?)?;
    }
    if cfg.output.wants(Format::Svg) && built.grid.is_some() {
        let pts: Vec<(f64, f64)> = configs
            .iter()
            .flat_map(|c| c.indices().iter().copied())
            .filter_map(|s| built.point(s).map(|p| (p.coords[0].re, p.coords[0].im)))
            .collect();
        let svg = scatter_svg(&pts, &reference_circles(&cfg.domain), 1.1);
        write_atomic(&out.join("scatter.svg"), svg.as_bytes())?;
    }
    Ok(Outcome {
        pass: true,
        summary: format!(
            "sample: {} configurations on {} sites, mean count {mean:.4} (kernel trace {:.4})",
            configs.len(),
            built.kernel.size(),
            built.kernel.trace()
        ),
    })
}

struct ProbeOutput {
    report: Value,
    pass: bool,
    headline: String,
    files: Vec<(String, Vec<u8>)>,
}

fn require_palm(cfg: &ExperimentConfig, size: usize) -> Result<PalmTuple, CliError> {
    if cfg.probe.palm.is_empty() {
        return Err(CliError::config(None, "this probe needs probe.palm"));
    }
    check_indices(&cfg.probe.palm, size, "probe.palm")?;
    PalmTuple::new(cfg.probe.palm.clone()).map_err(CliError::from)
}

fn require_size(built: &Built, limit: usize, kind: ProbeKind) -> Result<(), CliError> {
    if built.kernel.size() > limit {
        return Err(CliError::config(
            None,
            format!(
                "probe {} enumerates configurations and needs at most {limit} sites; the kernel has {} (use kernel.restrict or kernel.mode = random)",
                kind.as_str(),
                built.kernel.size()
            ),
        ));
    }
    Ok(())
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

fn tolerance_probe(cfg: &ExperimentConfig, insertion: bool) -> Result<ProbeOutput, CliError> {
    let built = build(cfg, 0)?;
    let sel = cfg.probe.b.as_ref().ok_or_else(|| CliError::config(None, "this probe needs probe.b"))?;
    let b = built.select(sel, "probe.b")?;
    if b.is_empty() {
        return Err(CliError::config(None, "probe.b selects no sites"));
    }
    let seed = RngSeed::new(cfg.seed, 0);
    let obs = observe_conditionings(&built.kernel, &b, cfg.probe.samples, seed)?;
    let report = if insertion { insertion_report(&obs, seed) } else { deletion_report(&obs, seed) };
    let mut value = to_sorted_value(&report)?;
    value["sites"] = json!(built.kernel.size());
    value["window_sites"] = json!(b.len());
    value["clamp_moved"] = json!(built.clamp_moved);
    let headline = if insertion {
        format!("min trace {:e}, min P(#B>0) {:e}", report.trace_stats.min, report.min_insertion)
    } else {
        format!("min gap {:e}, max lambda {:e}", report.min_gap, report.max_lambda)
    };
    let mut files = Vec::new();
    if cfg.output.wants(Format::Csv) {
        let rows = obs.iter().enumerate().map(|(i, o)| {
            vec![i.to_string(), num(o.gap), num(o.lambda_max), num(o.trace), o.singular.to_string()]
        });
        files.push((
            "observations.csv".into(),
            csv_bytes(&["sample", "gap", "lambda_max", "trace", "singular"], rows)?,
        ));
    }
    Ok(ProbeOutput {
        report: value,
        pass: report.pass,
        headline,
        files,
    })
}

fn oracle_probe(cfg: &ExperimentConfig, kind: ProbeKind) -> Result<ProbeOutput, CliError> {
    let mut rows = Vec::new();
    for i in 0..cfg.probe.instances as u64 {
        let built = build(cfg, i)?;
        require_size(&built, ORACLE_SITES, kind)?;
        let k = &built.kernel;
        let tv = if kind == ProbeKind::PalmOracle {
            let p = require_palm(cfg, k.size())?;
            let oracle = palm_distribution_oracle(k, &p)?;
            oracle.total_variation(&exact_distribution(&palm_kernel(k, &p)?)?)
        } else {
            let sel = cfg
                .probe
                .window
                .as_ref()
                .ok_or_else(|| CliError::config(None, "this probe needs probe.window"))?;
            let w = built.select(sel, "probe.window")?;
            check_indices(&cfg.probe.exterior, k.size(), "probe.exterior")?;
            if let Some(s) = cfg.probe.exterior.iter().find(|s| w.contains(s)) {
                return Err(CliError::config(None, format!("probe.exterior site {s} lies in the window")));
            }
            let ext = Configuration::new(cfg.probe.exterior.clone(), k.size())?;
            let oracle = conditional_oracle(k, &w, &ext)?;
            oracle.total_variation(&exact_distribution(&conditional_kernel(k, &w, &ext)?)?)
        };
        rows.push(json!({"instance": i, "sites": k.size(), "tv": tv, "pass": tv <= ORACLE_TV}));
    }
    let max_tv = max_of(rows.iter().map(|r| r["tv"].as_f64().unwrap_or(f64::INFINITY)));
    let pass = max_tv <= ORACLE_TV;
    let mut files = Vec::new();
    if cfg.output.wants(Format::Csv) {
        let csv_rows = rows
            .iter()
            .map(|r| vec![r["instance"].to_string(), r["sites"].to_string(), num(r["tv"].as_f64().unwrap_or(f64::NAN))]);
        files.push((format!("{}.csv", kind.as_str()), csv_bytes(&["instance", "sites", "tv"], csv_rows)?));
    }
    Ok(ProbeOutput {
        report: json!({
            "instances": rows,
            "max_tv": max_tv,
            "tolerance": ORACLE_TV,
            "pass": pass,
            "seed": cfg.seed,
        }),
        pass,
        headline: format!("max TV {max_tv:e} over {} instance(s)", cfg.probe.instances),
        files,
    })
}

fn coupling_probe(cfg: &ExperimentConfig, kind: ProbeKind) -> Result<ProbeOutput, CliError> {
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for i in 0..cfg.probe.instances as u64 {
        let built = build(cfg, i)?;
        require_size(&built, MAX_COUPLING_SITES, kind)?;
        let k = &built.kernel;
        let p = require_palm(cfg, k.size())?;
        match palm_coupling(k, &p) {
            Ok(table) => {
                let kp = palm_kernel(k, &p)?;
                let valid = table.is_valid_for(&exact_distribution(k)?, &exact_distribution(&kp)?, 1e-9);
                let mut row = json!({
                    "instance": i,
                    "feasible": true,
                    "valid": valid,
                    "entries": table.entries().len(),
                    "pass": valid,
                });
                if kind == ProbeKind::TraceBound {
                    let tb = difference_trace_bound(k, &p, &table)?;
                    row["trace_bound"] = to_sorted_value(&tb)?;
                    row["pass"] = json!(valid && tb.pass);
                }
                if cfg.output.wants(Format::Json) {
                    files.push((
                        format!("coupling-{i}.json"),
                        crate::output::json_string(&to_sorted_value(&table)?).into_bytes(),
                    ));
                }
                rows.push(row);
            }
            Err(Error::DominationViolated { certificate, excess }) => {
                let up_set: Vec<Configuration> = certificate.iter().map(|&m| Configuration::from_mask(m)).collect();
                rows.push(json!({
                    "instance": i,
                    "feasible": false,
                    "certificate": up_set,
                    "excess": excess,
                    "pass": false,
                }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    let passed = rows.iter().filter(|r| r["pass"] == json!(true)).count();
    let pass = passed == rows.len();
    Ok(ProbeOutput {
        report: json!({"instances": rows, "pass": pass, "seed": cfg.seed}),
        pass,
        headline: format!("{passed}/{} instance(s) pass", cfg.probe.instances),
        files,
    })
}

fn domination_probe(cfg: &ExperimentConfig) -> Result<ProbeOutput, CliError> {
    let mut rows = Vec::new();
    for i in 0..cfg.probe.instances as u64 {
        let built = build(cfg, i)?;
        let p = require_palm(cfg, built.kernel.size())?;
        let kp = palm_kernel(&built.kernel, &p)?;
        let r = domination_check(&built.kernel, &kp, cfg.probe.samples, RngSeed::new(cfg.seed, 0).split(i))?;
        rows.push(to_sorted_value(&r)?);
    }
    let passed = rows.iter().filter(|r| r["pass"] == json!(true)).count();
    let pass = passed == rows.len();
    Ok(ProbeOutput {
        report: json!({"instances": rows, "pass": pass, "seed": cfg.seed}),
        pass,
        headline: format!("{passed}/{} instance(s) pass", cfg.probe.instances),
        files: Vec::new(),
    })
}

fn gaf_probe(cfg: &ExperimentConfig) -> Result<ProbeOutput, CliError> {
    let g = &cfg.gaf;
    let report = intensity_compare(g.terms, g.radius, g.bins, g.trials, RngSeed::new(cfg.seed, 0))?;
    let mut files = Vec::new();
    if cfg.output.wants(Format::Csv) {
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        files.push(("gaf.csv".into(), buf));
    }
    if cfg.output.wants(Format::Svg) {
        let zeros = sample_zero_set(g.terms, RngSeed::new(cfg.seed, 2))?;
        let pts: Vec<(f64, f64)> = zeros
            .roots
            .iter()
            .filter(|z| z.norm() < 1.3)
            .map(|z| (z.re, z.im))
            .collect();
        files.push(("scatter.svg".into(), scatter_svg(&pts, &[g.radius, 1.0], 1.3).into_bytes()));
    }
    Ok(ProbeOutput {
        headline: format!("max |z-score| {:.3}, {} trial(s) excluded", report.max_abs_z(), report.excluded),
        pass: report.pass,
        report: to_sorted_value(&report)?,
        files,
    })
}

fn annulus_probe(cfg: &ExperimentConfig) -> Result<ProbeOutput, CliError> {
    let DomainSpec::Annulus { rho } = cfg.domain else {
        return Err(CliError::config(None, "annulus-check needs domain.kind = annulus"));
    };
    let check = annulus_cross_check(rho, cfg.probe.pairs, RngSeed::new(cfg.seed, 0))?;
    let mut files = Vec::new();
    if cfg.output.wants(Format::Csv) {
        let rows = check.pairs.iter().map(|p| {
            vec![
                num(p.z[0]),
                num(p.z[1]),
                num(p.w[0]),
                num(p.w[1]),
                num(p.elliptic[0]),
                num(p.elliptic[1]),
                num(p.laurent[0]),
                num(p.laurent[1]),
                p.laurent_terms.to_string(),
                num(p.relative_error),
            ]
        });
        let header = [
            "z_re", "z_im", "w_re", "w_im", "elliptic_re", "elliptic_im", "laurent_re", "laurent_im", "laurent_terms",
            "relative_error",
        ];
        files.push(("annulus.csv".into(), csv_bytes(&header, rows)?));
    }
    let mut report = to_sorted_value(&check)?;
    report["seed"] = json!(cfg.seed);
    Ok(ProbeOutput {
        headline: format!("max relative error {:e}", check.max_relative_error),
        pass: check.pass,
        report,
        files,
    })
}

/// Run one probe and write `report.json` (always) plus its artifacts.
pub fn probe(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let kind = cfg
        .probe
        .kind
        .ok_or_else(|| CliError::config(None, "probe.kind is not set (or pass --probe)"))?;
    let result = match kind {
        ProbeKind::Deletion => tolerance_probe(cfg, false),
        ProbeKind::Insertion => tolerance_probe(cfg, true),
        ProbeKind::PalmOracle | ProbeKind::ConditionalOracle => oracle_probe(cfg, kind),
        ProbeKind::Coupling | ProbeKind::TraceBound => coupling_probe(cfg, kind),
        ProbeKind::Domination => domination_probe(cfg),
        ProbeKind::Gaf => gaf_probe(cfg),
        ProbeKind::AnnulusCheck => annulus_probe(cfg),
    }?;
    write_resolved(cfg, out)?;
    for (name, bytes) in &result.files {
        write_atomic(&out.join(name), bytes)?;
    }
    let mut report = result.report;
    report["probe"] = json!(kind.as_str());
    report["version"] = json!(bergman_dpp::VERSION);
    write_json(&out.join(REPORT_FILE), &report)?;
    let verdict = if result.pass { "PASS" } else { "FAIL" };
    Ok(Outcome {
        pass: result.pass,
        summary: format!("{}: {verdict} ({})", kind.as_str(), result.headline),
    })
}

fn find_reports(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| CliError::io(dir, err)))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_reports(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == REPORT_FILE || n == RESOLVED_CONFIG) {
            found.push(p);
        }
    }
    Ok(())
}

const HEADLINE_KEYS: [&str; 7] = [
    "min_gap",
    "max_lambda",
    "max_tv",
    "max_relative_error",
    "excluded",
    "samples",
    "trials",
];

fn headline(v: &Value) -> String {
    let mut parts: Vec<String> = HEADLINE_KEYS
        .iter()
        .filter_map(|k| v.get(k).map(|x| format!("{k}={x}")))
        .collect();
    if let Some(Value::Array(inst)) = v.get("instances") {
        let passed = inst.iter().filter(|r| r["pass"] == Value::Bool(true)).count();
        parts.push(format!("instances={passed}/{} pass", inst.len()));
    }
    parts.join(", ")
}

fn seed_of(v: &Value) -> String {
    match v.get("seed") {
        Some(Value::Object(s)) => s.get("seed").map_or("?".into(), Value::to_string),
        Some(s) => s.to_string(),
        None => "?".into(),
    }
}

/// Summarize every `report.json` below `dir` into one markdown table.
pub fn report(dir: &Path, out: &Path) -> Result<Outcome, CliError> {
    let mut found = Vec::new();
    find_reports(dir, &mut found)?;
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    let mut failed = 0;
    for path in found.iter().filter(|p| p.ends_with(RESOLVED_CONFIG)) {
        let parent = path.parent().unwrap_or(dir);
        if !parent.join(REPORT_FILE).exists() && !parent.join("configurations.json").exists() {
            problems.push(format!("| `{}` | missing {REPORT_FILE} |", rel(dir, parent)));
        }
    }
    for path in found.iter().filter(|p| p.ends_with(REPORT_FILE)) {
        let name = rel(dir, path.parent().unwrap_or(dir));
        let parsed = std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str::<Value>(&t).map_err(|e| e.to_string()));
        match parsed {
            Ok(v) if v.get("pass").and_then(Value::as_bool).is_some() => {
                let pass = v["pass"].as_bool().unwrap_or(false);
                if !pass {
                    failed += 1;
                }
                rows.push(format!(
                    "| `{name}` | {} | {} | {} | {} |",
                    v.get("probe").and_then(Value::as_str).unwrap_or("?"),
                    seed_of(&v),
                    if pass { "PASS" } else { "FAIL" },
                    headline(&v)
                ));
            }
            Ok(_) => problems.push(format!("| `{name}` | no boolean `pass` field |")),
            Err(e) => problems.push(format!("| `{name}` | {} |", e.replace('|', "\\|"))),
        }
    }
    let mut md = String::from("# Probe summary\n\n| run | probe | seed | verdict | statistics |\n|---|---|---|---|---|\n");
    for r in &rows {
        md.push_str(r);
        md.push('\n');
    }
    if !problems.is_empty() {
        md.push_str("\n## Unreadable or missing reports\n\n| run | problem |\n|---|---|\n");
        for p in &problems {
            md.push_str(p);
            md.push('\n');
        }
    }
    write_atomic(&out.join(SUMMARY_FILE), md.as_bytes())?;
    Ok(Outcome {
        pass: failed == 0,
        summary: format!(
            "report: {} probe(s), {failed} failed, {} unreadable",
            rows.len(),
            problems.len()
        ),
    })
}

fn rel(base: &Path, p: &Path) -> String {
    let r = p.strip_prefix(base).unwrap_or(p);
    if r.as_os_str().is_empty() {
        ".".into()
    } else {
        r.display().to_string()
    }
}
