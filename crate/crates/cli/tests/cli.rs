use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bergman-dpp"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

const SAMPLE: &str = "seed = 4\ndomain.kind = disk\ndomain.alpha = 1\ngrid.resolution = 8\nsample.count = 40\noutput.formats = csv, json, svg\n";

#[test]
fn sample_outputs_are_byte_identical_across_reruns_and_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.conf", SAMPLE);
    let cfg = cfg.to_str().unwrap();
    let mut runs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out = tmp.path().join(name);
        let o = run(&["sample", "--config", cfg, "--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(files(&out));
    }
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["configurations.json", "points.csv", "resolved.conf", "scatter.svg"]);
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn seed_flag_overrides_config_and_changes_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.conf", SAMPLE);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&run(&["sample", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()])), 0);
    assert_eq!(
        code(&run(&["sample", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", b.to_str().unwrap()])),
        0
    );
    let ja = fs::read_to_string(a.join("configurations.json")).unwrap();
    let jb = fs::read_to_string(b.join("configurations.json")).unwrap();
    assert_ne!(ja, jb);
    assert!(fs::read_to_string(b.join("resolved.conf")).unwrap().contains("seed = 5\n"));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.conf", SAMPLE);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&run(&["sample", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()])), 0);
    let resolved = a.join("resolved.conf");
    assert_eq!(code(&run(&["sample", "--config", resolved.to_str().unwrap(), "--out", b.to_str().unwrap()])), 0);
    assert_eq!(files(&a), files(&b));
}

#[test]
fn empty_kernel_samples_empty_configurations() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "e.conf", "kernel.mode = empty\ngrid.resolution = 4\nsample.count = 5\n");
    let out = tmp.path().join("o");
    let o = run(&["sample", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("configurations.json")).unwrap()).unwrap();
    assert_eq!(v["count"], 5);
    assert!(v["configurations"].as_array().unwrap().iter().all(|c| c.as_array().unwrap().is_empty()));
    assert_eq!(fs::read_to_string(out.join("points.csv")).unwrap(), "sample,site,x,y\n");
}

#[test]
fn config_errors_exit_2_with_line_number() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.conf", "seed = 1\ngrid.resolutoin = 8\n");
    let o = run(&["sample", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("grid.resolutoin"), "{err}");
    assert!(!tmp.path().join("o").exists());

    let missing = run(&["sample", "--config", tmp.path().join("nope.conf").to_str().unwrap()]);
    assert_eq!(code(&missing), 2);

    let too_big = write_config(tmp.path(), "big.conf", "grid.resolution = 8\nprobe.kind = palm-oracle\nprobe.palm = 0\n");
    let o = run(&["probe", "--config", too_big.to_str().unwrap(), "--out", tmp.path().join("p").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn numeric_contract_violation_exits_3() {
    let tmp = TempDir::new().unwrap();
    // Palm at a site the zero kernel never charges.
    let cfg = write_config(
        tmp.path(),
        "z.conf",
        "kernel.mode = empty\ngrid.resolution = 4\nkernel.restrict = 0..4\nprobe.kind = palm-oracle\nprobe.palm = 0\n",
    );
    let o = run(&["probe", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn probe_report_has_sorted_keys_and_contract_fields() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "p.conf",
        "seed = 9\nkernel.mode = random\nkernel.sites = 5\nprobe.kind = palm-oracle\nprobe.palm = 3\nprobe.instances = 4\n",
    );
    let out = tmp.path().join("o");
    let o = run(&["probe", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["probe"], "palm-oracle");
    assert_eq!(v["pass"], true);
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    // serde_json's default map is ordered, so also check the raw text order.
    let pos = |k: &str| text.find(&format!("\n  \"{k}\"")).unwrap();
    assert!(pos("instances") < pos("max_tv") && pos("max_tv") < pos("pass") && pos("pass") < pos("probe"));
}

#[test]
fn probe_flag_overrides_kind_and_annulus_probe_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "a.conf", "domain.kind = annulus\ndomain.rho = 0.4\nprobe.pairs = 10\n");
    let out = tmp.path().join("o");
    let o = run(&["probe", "--config", cfg.to_str().unwrap(), "--probe", "annulus-check", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("annulus.csv").exists());
    let bad = run(&["probe", "--config", cfg.to_str().unwrap(), "--probe", "bogus"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn failing_probe_exits_1_and_report_flags_it() {
    let tmp = TempDir::new().unwrap();
    let runs = tmp.path().join("runs");
    // Zeroing the window block leaves no mass inside it: insertion fails.
    let cfg = write_config(
        tmp.path(),
        "i.conf",
        "grid.resolution = 6\nkernel.zero_block = true\nprobe.kind = insertion\nprobe.b = disk_radius < 0.4\nprobe.samples = 4\n",
    );
    let o = run(&["probe", "--config", cfg.to_str().unwrap(), "--out", runs.join("fail").to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let ok = write_config(
        tmp.path(),
        "ok.conf",
        "grid.resolution = 6\nprobe.kind = deletion\nprobe.b = disk_radius < 0.4\nprobe.samples = 4\n",
    );
    let o = run(&["probe", "--config", ok.to_str().unwrap(), "--out", runs.join("ok").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    fs::create_dir_all(runs.join("broken")).unwrap();
    fs::write(runs.join("broken/report.json"), "{ not json").unwrap();

    let o = run(&["report", runs.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let md = fs::read_to_string(runs.join("summary.md")).unwrap();
    assert!(md.contains("| `fail` | insertion |") && md.contains("FAIL"), "{md}");
    assert!(md.contains("| `ok` | deletion |") && md.contains("PASS"), "{md}");
    assert!(md.contains("`broken`"), "{md}");
}

#[test]
fn report_on_empty_directory_is_an_empty_table() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["report", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let md = fs::read_to_string(tmp.path().join("summary.md")).unwrap();
    assert_eq!(md.lines().count(), 4, "{md}");
}
