use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use isingpf::instance::shipped_instance;
use isingpf::sampler::uniform_histogram;
use isingpf::sweep::SWEEP_CSV_HEADER;
use isingpf::{enumerate_exact, exact_partition, log_relative_error, InverseTemperature};

fn shipped_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/pm_j_25.json")
}

fn isingpf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isingpf")).args(args).env_remove("ISINGPF_MAX_SPINS").output().unwrap()
}

fn ok(args: &[&str]) {
    let out = isingpf(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_model(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn single_spin_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "one.json", r#"{"num_spins": 1, "h": {}, "j": []}"#);
    let out = dir.path().join("one.csv");
    ok(&["enumerate", "--model", path_str(&model), "--out", path_str(&out)]);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "energy,count\n0,2\n");
    let summary = read_json(&dir.path().join("one.summary.json"));
    let ln_z = summary["ln_z"][0]["ln_z"].as_f64().unwrap();
    assert!((ln_z - 2f64.ln()).abs() < 1e-15);
}

#[test]
fn ring_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(
        dir.path(),
        "ring.json",
        r#"{"num_spins": 4, "h": {}, "j": [[0,1,-1.0],[1,2,-1.0],[2,3,-1.0],[0,3,-1.0]]}"#,
    );
    let out = dir.path().join("ring.csv");
    ok(&["enumerate", "--model", path_str(&model), "--out", path_str(&out)]);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "energy,count\n-4,2\n0,12\n4,2\n");
}

#[test]
fn malformed_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "bad.json", "{\"num_spins\": 2,\n \"h\": {\"0\": \"up\"}, \"j\": []}");
    let out = isingpf(&["enumerate", "--model", path_str(&model), "--out", path_str(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("h.0") && err.contains("line 2"), "{err}");
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let model = shipped_path();
    let out = isingpf(&["estimate", "--model", path_str(&model), "--method", "gibbs", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(isingpf(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn enumeration_guard_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let model = shipped_path();
    let out = dir.path().join("s.csv");
    let run = |limit: &str| {
        Command::new(env!("CARGO_BIN_EXE_isingpf"))
            .args(["enumerate", "--model", path_str(&model), "--out", path_str(&out)])
            .env("ISINGPF_MAX_SPINS", limit)
            .output()
            .unwrap()
    };
    let small = run("10");
    assert_eq!(small.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&small.stderr).contains("ISINGPF_MAX_SPINS"));
    assert_eq!(run("ten").status.code(), Some(2));
    assert!(run("25").status.success());
}

#[test]
fn random_estimate_matches_library_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("random.csv");
    ok(&[
        "estimate", "--model", path_str(&shipped_path()), "--method", "random", "--samples", "1000000", "--seed", "7",
        "--out", path_str(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(last[0], 1e6);
    assert_eq!(text.lines().count(), 1 + 20 + 1);

    let model = shipped_instance();
    let beta = InverseTemperature::from_temperature(4.0).unwrap();
    let exact = exact_partition(&enumerate_exact(&model).unwrap(), beta).unwrap();
    let hist = uniform_histogram(&model, 1_000_000, 7);
    let ln_z = isingpf::dos::histogram_ln_z(&hist, 25, beta).unwrap();
    assert_eq!(last[1], ln_z);
    assert_eq!(last[2], log_relative_error(ln_z, exact).unwrap());
}

#[test]
fn wang_landau_zero_budget_is_one_unconverged_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("wl.csv");
    ok(&["estimate", "--model", path_str(&shipped_path()), "--method", "wl", "--steps", "0", "--out", path_str(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0,"));
    let summary = read_json(&dir.path().join("wl.summary.json"));
    assert_eq!(summary["details"]["converged"], false);
}

#[test]
fn forward_estimate_uses_sweep_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fwd.csv");
    ok(&[
        "estimate", "--model", path_str(&shipped_path()), "--method", "forward", "--anneal-times", "5,8",
        "--j-scales", "0.001,0.01", "--reads", "100", "--out", path_str(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), SWEEP_CSV_HEADER);
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn mhr_and_qemc_estimates_run() {
    let dir = tempfile::tempdir().unwrap();
    let mhr = dir.path().join("mhr.csv");
    ok(&["estimate", "--model", path_str(&shipped_path()), "--method", "mhr", "--samples", "4096", "--out", path_str(&mhr)]);
    let last = std::fs::read_to_string(&mhr).unwrap().lines().last().unwrap().to_string();
    assert!(last.starts_with("20480,"), "{last}");
    let qemc = dir.path().join("qemc.csv");
    ok(&[
        "estimate", "--model", path_str(&shipped_path()), "--method", "qemc", "--chains", "4", "--chain-length", "10",
        "--out", path_str(&qemc),
    ]);
    assert!(std::fs::read_to_string(&qemc).unwrap().lines().last().unwrap().starts_with("40,"));
}

#[test]
fn sweep_is_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        ok(&[
            "sweep", "--model", path_str(&shipped_path()), "--anneal-times", "5,20", "--j-scales", "0.001,0.01,0.1",
            "--reads", "200", "--cumulative", "--seed", "3", "--out", path_str(out),
        ]);
    }
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());

    std::fs::remove_file(&a).unwrap();
    ok(&["replay", path_str(&dir.path().join("a.manifest.json"))]);
    assert_eq!(std::fs::read(&a).unwrap(), first);
}

#[test]
fn reverse_sweep_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rev.csv");
    ok(&[
        "sweep", "--model", path_str(&shipped_path()), "--protocol", "reverse", "--j-scales", "0.5,1", "--s-pauses",
        "0.5,0.9", "--chain-length", "20", "--out", path_str(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(1).unwrap().starts_with("reverse,20000,0.5,0.5,20,"));
}

#[test]
fn ga_search_writes_trace_and_genome() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    ok(&[
        "ga-search", "--protocol", "forward", "--model", path_str(&shipped_path()), "--anneal-times", "5,8",
        "--j-scales", "0.001,0.01,0.1", "--reads-choices", "100,200", "--population", "6", "--generations", "3",
        "--out", path_str(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let best: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(!best.is_empty());
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
    let genome = read_json(&dir.path().join("trace.genome.json"));
    assert!(!genome["best"]["j_scales"].as_array().unwrap().is_empty());
    assert_eq!(genome["best"]["protocol"], "forward");
}

#[test]
fn embed_packs_edges_into_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let pattern = write_model(dir.path(), "edge.txt", "2 1\n0 1\n");
    let host = write_model(dir.path(), "p5.txt", "5 4\n0 1\n1 2\n2 3\n3 4\n");
    let out = dir.path().join("packing.json");
    ok(&["embed", "--pattern", path_str(&pattern), "--host", path_str(&host), "--out", path_str(&out)]);
    let packing = read_json(&out);
    assert_eq!(packing["count"], 2);
    assert_eq!(packing["verified"], true);

    let bad = write_model(dir.path(), "bad.txt", "2 1\n0 x\n");
    let run = isingpf(&["embed", "--pattern", path_str(&bad), "--host", path_str(&host), "--out", path_str(&out)]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 2"));
}

#[test]
fn every_output_has_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let model = shipped_path();
    let d = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    ok(&["enumerate", "--model", path_str(&model), "--out", &d("spectrum.csv")]);
    ok(&["estimate", "--model", path_str(&model), "--method", "random", "--samples", "1000", "--out", &d("r.csv")]);
    ok(&["sweep", "--model", path_str(&model), "--anneal-times", "5", "--j-scales", "0.01", "--reads", "50", "--out", &d("s.csv")]);

    let mut listed = BTreeSet::new();
    let mut present = BTreeSet::new();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.to_str().unwrap().ends_with(".manifest.json") {
            listed.insert(path.clone());
            for output in read_json(&path)["outputs"].as_array().unwrap() {
                listed.insert(PathBuf::from(output.as_str().unwrap()));
            }
        }
        present.insert(path);
    }
    assert_eq!(listed, present);
}
