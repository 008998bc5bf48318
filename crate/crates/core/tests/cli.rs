//! End-to-end runs of the `twoscale` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn twoscale(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twoscale"))
        .args(args)
        .arg("--output")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn preset(name: &str) -> String {
    format!("{}/configs/{name}.toml", env!("CARGO_MANIFEST_DIR"))
}

fn only_file(dir: &Path, ext: &str) -> PathBuf {
    let mut found: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    assert_eq!(found.len(), 1, "{found:?}");
    found.pop().unwrap()
}

#[test]
fn limit_solve_at_order_zero_writes_the_gauge_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let o = twoscale(
        dir.path(),
        &["limit-solve", "--set", "discretization.order=0", "--set", "initial.kind=\"constant\"", "--set", "initial.value=0.25"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(only_file(dir.path(), "spec")).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(body[0].starts_with("spectral3 P=0"));
    assert_eq!(body.len(), 2);
    let fields: Vec<f64> = body[1].split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(fields, [0.0, 0.0, 0.0, 0.25, 0.0]);
    assert!(dir.path().join("diagnostics.csv").exists());
}

#[test]
fn render_then_self_compare_gives_zero_norms() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--set", "discretization.order=2", "--set", "discretization.grid=16"];
    let o = twoscale(dir.path(), &[&["limit-solve"], &args[..]].concat());
    assert_eq!(code(&o), 0);
    let snap = only_file(dir.path(), "spec");
    let snap = snap.to_str().unwrap();

    let o = twoscale(dir.path(), &[&["render", "--snapshot", snap, "--theta", "0.25"], &args[..]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let pgm = fs::read_to_string(only_file(dir.path(), "pgm")).unwrap();
    assert!(pgm.starts_with("P2\n") && pgm.contains("\n16 16\n255\n"));
    let grid_csv = fs::read_to_string(Path::new(snap).with_extension("csv")).unwrap();
    let rows: Vec<&str> = grid_csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r.split(',').count() == 16));

    let o = twoscale(
        dir.path(),
        &[&["compare", "--assert", "--snapshots", snap, snap, "--set", "assert.linf_max=0.0"], &args[..]].concat(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let norms: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(norms, [0.0, 0.0, 0.0]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["limit-solve", "--set", "run.nope=1"][..],
        &["limit-solve", "--set", "run.epsilon=-0.5"][..],
        &["sweep", "--config", "/nonexistent/config.toml"][..],
    ] {
        let o = twoscale(dir.path(), args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn solver_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = twoscale(
        dir.path(),
        &["reference-solve", "--set", "discretization.order=2", "--set", "integrator.max_steps=1", "--set", "run.epsilon=0.01"],
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn asserted_thresholds_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["--set", "discretization.order=2", "--set", "discretization.nq=32", "--set", "run.epsilon=0.1", "--set", "run.t_end=0.1", "--set", "run.times=[0.1]"];
    let strict = [&base[..], &["--set", "assert.l2_max=1e-12"]].concat();

    let o = twoscale(dir.path(), &[&["compare"], &strict[..]].concat());
    assert_eq!(code(&o), 0, "without --assert a violation only warns");
    let o = twoscale(dir.path(), &[&["compare", "--assert"], &strict[..]].concat());
    assert_eq!(code(&o), 4);
    let o = twoscale(dir.path(), &[&["compare", "--assert"], &base[..], &["--set", "assert.l2_max=10.0"]].concat());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "epsilon,P,t,l1,l2,linf,runtime_s,steps"));
}

#[test]
fn sweep_preset_writes_one_row_per_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let config = preset("wat0_sweep");
    // Coarser settings than the preset keep the test quick; the row layout is the same.
    let o = twoscale(
        dir.path(),
        &["sweep", "--config", &config, "--set", "discretization.order=2", "--set", "discretization.nq=32", "--set", "run.t_end=0.1", "--set", "run.times=[0.1]"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("# config_sha256=")));
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("epsilon"))
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 6);
    let eps: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(eps, ["0.01", "0.03", "0.05", "0.07", "0.09", "0.1"]);
    assert!(rows.iter().all(|r| r.len() == 8 && r[4].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn hypotheses_report_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let o = twoscale(dir.path(), &["hypotheses", "--density", "16"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("hypotheses.txt")).unwrap();
    assert!(!text.is_empty());
}

#[test]
fn presets_parse() {
    for name in ["wat0_sweep", "wat_compare_eps0p1", "well_prepared_eps0p001"] {
        let dir = tempfile::tempdir().unwrap();
        let o = twoscale(dir.path(), &["hypotheses", "--density", "16", "--config", &preset(name)]);
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
