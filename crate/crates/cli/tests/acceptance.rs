//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.
//!
//! Run with `cargo test -p bergman-dpp-cli --test acceptance`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bergman_dpp::conditional::{block_zero_kernel, conditional_oracle, deletion_tolerance_probe, number_insertion_probe};
use bergman_dpp::coupling::{difference_trace_bound, palm_coupling};
use bergman_dpp::discretize::{build_grid, kernel_matrix};
use bergman_dpp::dpp::{exact_distribution, gap_probability};
use bergman_dpp::gaf::{expected_count_below, intensity_compare};
use bergman_dpp::kernels::{annulus_cross_check, ball_volume, eval_kernel};
use bergman_dpp::palm::{palm_distribution_oracle, palm_kernel};
use bergman_dpp::random::random_contraction;
use bergman_dpp::{conditional_kernel, Configuration, DomainSpec, DppKernel, PalmTuple, Point, RngSeed, Sampler};
use rand::seq::SliceRandom;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

type Check = fn() -> Result<Verdict, String>;

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict, String> {
    Ok(Verdict { pass, detail: detail.into() })
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn contraction(seed: RngSeed, m: usize) -> Result<DppKernel, String> {
    DppKernel::new(random_contraction(&mut seed.rng(), m, 0.05, 0.95)).map_err(e)
}

fn disk_grid_kernel(alpha: f64) -> Result<(DppKernel, Vec<usize>), String> {
    let grid = build_grid(DomainSpec::Disk { alpha }, 16, 0.15).map_err(e)?;
    let b = grid.within_radius(0.3);
    Ok((kernel_matrix(&grid, 1e-6).map_err(e)?.kernel, b))
}

fn kernel_at_origin() -> Result<Verdict, String> {
    let mut cases = vec![
        (DomainSpec::Disk { alpha: 0.0 }, 1.0 / PI),
        (DomainSpec::Polydisk { d: 2 }, 1.0 / (PI * PI)),
    ];
    cases.extend((1..=4).map(|d| (DomainSpec::Ball { d }, 1.0 / ball_volume(d))));
    let mut worst: f64 = 0.0;
    for (spec, want) in &cases {
        let o = Point::origin(spec.dim());
        let got = eval_kernel(spec, &o, &o).map_err(e)?;
        worst = worst.max((got - want).norm() / want);
    }
    verdict(worst <= 1e-12, format!("{} domains, max rel err {worst:.2e} (tol 1e-12)", cases.len()))
}

fn annulus_representations() -> Result<Verdict, String> {
    let mut worst: f64 = 0.0;
    for (i, rho) in [0.3, 0.5, 0.7].into_iter().enumerate() {
        let c = annulus_cross_check(rho, 50, RngSeed::new(2, i as u64)).map_err(e)?;
        worst = worst.max(c.max_relative_error);
    }
    verdict(worst <= 1e-8, format!("3 x 50 pairs, max rel err {worst:.2e} (tol 1e-8)"))
}

fn palm_oracle() -> Result<Verdict, String> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for seed in 0..20u64 {
        for m in 4..=6 {
            for l in 1..=2 {
                let s = RngSeed::new(seed, 100 + 10 * m as u64 + l as u64);
                let k = contraction(s, m)?;
                let mut sites: Vec<usize> = (0..m).collect();
                sites.shuffle(&mut s.split(1).rng());
                let p = PalmTuple::new(sites[..l].to_vec()).map_err(e)?;
                let oracle = palm_distribution_oracle(&k, &p).map_err(e)?;
                let law = exact_distribution(&palm_kernel(&k, &p).map_err(e)?).map_err(e)?;
                worst = worst.max(oracle.total_variation(&law));
                n += 1;
            }
        }
    }
    verdict(worst <= 1e-8, format!("{n} instances, max TV {worst:.2e} (tol 1e-8)"))
}

fn conditional_equivalence() -> Result<Verdict, String> {
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let s = RngSeed::new(i, 200);
        let m = 3 + (i as usize % 6);
        let k = contraction(s, m)?;
        let mut rng = s.split(1).rng();
        let w_len = rng.random_range(2..m);
        let mut sites: Vec<usize> = (0..m).collect();
        sites.shuffle(&mut rng);
        let mut w = sites[..w_len].to_vec();
        w.sort_unstable();
        let ext: Vec<usize> = sites[w_len..].iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        let ext = Configuration::new(ext, m).map_err(e)?;
        let oracle = conditional_oracle(&k, &w, &ext).map_err(e)?;
        let law = exact_distribution(&conditional_kernel(&k, &w, &ext).map_err(e)?).map_err(e)?;
        worst = worst.max(oracle.total_variation(&law));
    }
    verdict(worst <= 1e-8, format!("20 instances, m in 3..=8, max TV {worst:.2e} (tol 1e-8)"))
}

fn gap_consistency() -> Result<Verdict, String> {
    // Monte Carlo on the disk quadrature kernel.
    let (k, b) = disk_grid_kernel(0.0)?;
    let gap = gap_probability(&k, &b).map_err(e)?;
    let sampler = Sampler::new(&k).map_err(e)?;
    let n = 10_000u64;
    let base = RngSeed::new(5, 0);
    let mut empty = 0u64;
    for i in 0..n {
        let c = sampler.sample(base.split(i)).map_err(e)?;
        if c.intersect(&b).is_empty() {
            empty += 1;
        }
    }
    let freq = empty as f64 / n as f64;
    let sigma = (gap * (1.0 - gap) / n as f64).sqrt();
    let z = (freq - gap) / sigma;

    // Enumeration on random contractions, all windows.
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let m = 10;
        let k = contraction(RngSeed::new(seed, 300), m)?;
        let law = exact_distribution(&k).map_err(e)?;
        for window in 1u32..(1 << m) {
            let b: Vec<usize> = (0..m).filter(|i| window >> i & 1 == 1).collect();
            let d = gap_probability(&k, &b).map_err(e)?;
            worst = worst.max((d - law.avoidance(window)).abs());
        }
    }
    verdict(
        z.abs() <= 3.0 && worst <= 1e-9,
        format!(
            "MC {freq:.4} vs det {gap:.4} ({z:+.2} sigma, tol 3); enumeration max err {worst:.2e} (tol 1e-9)"
        ),
    )
}

fn deletion_tolerance() -> Result<Verdict, String> {
    let mut parts = Vec::new();
    let mut pass = true;
    for alpha in [0.0, 1.0] {
        let (k, b) = disk_grid_kernel(alpha)?;
        let r = deletion_tolerance_probe(&k, &b, 200, RngSeed::new(7, 0)).map_err(e)?;
        pass &= r.pass && r.min_gap > 0.0 && r.max_lambda < 1.0 - 1e-9 && r.samples == 200;
        parts.push(format!("alpha={alpha}: min gap {:.3e}, max lambda {:.4}", r.min_gap, r.max_lambda));
    }
    verdict(pass, parts.join("; "))
}

fn insertion_tolerance() -> Result<Verdict, String> {
    let (k, b) = disk_grid_kernel(0.0)?;
    let disk = number_insertion_probe(&k, &b, 200, RngSeed::new(7, 0)).map_err(e)?;
    let zero = block_zero_kernel(&k, &b).map_err(e)?;
    let counter = number_insertion_probe(&zero, &b, 200, RngSeed::new(7, 0)).map_err(e)?;
    verdict(
        disk.pass && !counter.pass,
        format!(
            "disk {} (min P(#B>0) {:.3e}); block-zero {} (min {:.1e})",
            if disk.pass { "PASS" } else { "FAIL" },
            disk.min_insertion,
            if counter.pass { "PASS" } else { "FAIL" },
            counter.min_insertion
        ),
    )
}

fn coupling() -> Result<Verdict, String> {
    let mut feasible = 0;
    let mut worst_identity: f64 = 0.0;
    let mut bound_ok = true;
    for seed in 0..20u64 {
        let k = contraction(RngSeed::new(seed, 400), 5)?;
        let p = PalmTuple::single(seed as usize % 5);
        let Ok(table) = palm_coupling(&k, &p) else { continue };
        let r = difference_trace_bound(&k, &p, &table).map_err(e)?;
        if r.coupling_valid {
            feasible += 1;
        }
        worst_identity = worst_identity.max((r.expected_difference - r.trace_gap).abs());
        bound_ok &= r.expected_difference <= r.trace_of_difference + 1e-9;
    }
    verdict(
        feasible == 20 && worst_identity <= 1e-9 && bound_ok,
        format!("{feasible}/20 feasible; |E[#X-#Y] - trace gap| max {worst_identity:.2e} (tol 1e-9); bound holds: {bound_ok}"),
    )
}

fn gaf_intensity() -> Result<Verdict, String> {
    let inner = expected_count_below(0.5);
    let derived = (inner - 1.0 / 3.0).abs() <= 1e-10;
    let r = intensity_compare(120, 0.8, 8, 10_000, RngSeed::new(11, 0)).map_err(e)?;
    let disk = r.disk(0.5).ok_or("no cumulative row at r = 0.5")?;
    verdict(
        r.pass && r.max_abs_z() <= 4.0 && derived && disk.z_score.abs() <= 3.0,
        format!(
            "max bin |z| {:.2} (tol 4), {} excluded; |z|<0.5: {:.4} vs quadrature {:.10} ({:+.2} sigma, tol 3)",
            r.max_abs_z(),
            r.excluded,
            disk.observed_mean,
            inner,
            disk.z_score
        ),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .map(|d| d.path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap_or_default()))
        .collect();
    v.sort();
    v
}

fn reproducibility() -> Result<Verdict, String> {
    let tmp = tempfile::TempDir::new().map_err(e)?;
    let configs = [
        ("sample", "seed = 3\ndomain.kind = disk\ndomain.alpha = 1\ngrid.resolution = 10\nsample.count = 50\n"),
        ("probe", "seed = 3\ngrid.resolution = 10\nprobe.kind = deletion\nprobe.b = disk_radius < 0.3\nprobe.samples = 20\n"),
        ("probe", "seed = 3\nkernel.mode = random\nkernel.sites = 5\nprobe.kind = trace-bound\nprobe.palm = 1\nprobe.instances = 3\n"),
        ("probe", "seed = 3\nprobe.kind = gaf\ngaf.trials = 200\n"),
    ];
    let mut compared = 0;
    for (i, (cmd, text)) in configs.iter().enumerate() {
        let cfg = tmp.path().join(format!("{i}.conf"));
        fs::write(&cfg, text).map_err(e)?;
        let mut runs = Vec::new();
        for (run, threads) in ["1", "2"].iter().enumerate() {
            let out = tmp.path().join(format!("{i}-{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_bergman-dpp"))
                .args([cmd, "--config", cfg.to_str().unwrap(), "--threads", threads, "--out", out.to_str().unwrap()])
                .output()
                .map_err(e)?;
            if !status.status.success() {
                return verdict(false, format!("config {i} exited with {:?}", status.status.code()));
            }
            runs.push(snapshot(&out));
        }
        if runs[0].is_empty() || runs[0] != runs[1] {
            return verdict(false, format!("config {i}: outputs differ between reruns"));
        }
        compared += runs[0].len();
    }
    verdict(true, format!("{compared} files byte-identical across reruns (1 vs 2 threads)"))
}

fn main() {
    let criteria: [(&str, Check, Duration); 10] = [
        ("kernel values at the origin", kernel_at_origin, Duration::from_secs(1)),
        ("annulus elliptic vs Laurent", annulus_representations, Duration::from_secs(30)),
        ("Palm oracle equivalence", palm_oracle, Duration::from_secs(60)),
        ("conditional oracle equivalence", conditional_equivalence, Duration::from_secs(60)),
        ("gap probability consistency", gap_consistency, Duration::from_secs(120)),
        ("deletion tolerance", deletion_tolerance, Duration::from_secs(300)),
        ("number insertion tolerance", insertion_tolerance, Duration::from_secs(300)),
        ("monotone coupling and trace bound", coupling, Duration::from_secs(60)),
        ("GAF zero intensity", gaf_intensity, Duration::from_secs(600)),
        ("byte-identical reruns", reproducibility, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let (pass, detail) = match result {
            Ok(v) => (v.pass && took <= *budget, v.detail),
            Err(err) => (false, format!("error: {err}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.2}s / {}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
