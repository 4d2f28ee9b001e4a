//! End-to-end runs of the `lss` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lss_core::estimate::cof_estimate;
use lss_core::simulate::simulate_exact_gaussian;
use lss_core::{GammaKernelParams, RngSeed, SimGrid};

fn lss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lss"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> serde_json::Value {
    assert_eq!(code(out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn simulate_to(path: &Path, extra: &[&str]) {
    let mut args = vec![
        "simulate",
        "--alpha",
        "-0.1",
        "--n",
        "500",
        "--seed",
        "7",
        "--out",
        path.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let out = lss(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_writes_header_and_n_plus_one_rows() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("x.csv");
    simulate_to(&file, &[]);
    let text = fs::read_to_string(&file).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x");
    assert_eq!(lines.len(), 502);
}

#[test]
fn simulate_is_deterministic_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for extra in [&[][..], &["--vol", "expou:5:-0.5", "--m", "200"][..]] {
        simulate_to(&a, extra);
        simulate_to(&b, extra);
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }
}

#[test]
fn estimate_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("x.csv");
    simulate_to(&file, &[]);
    let v = json(&lss(&["estimate-alpha", "--in", file.to_str().unwrap()]));
    let params = GammaKernelParams::new(-0.1, 1.0).unwrap();
    let path = simulate_exact_gaussian(&params, 1.0, &SimGrid::new(500, 1.0).unwrap(), RngSeed::new(7, 0)).unwrap();
    let expected = cof_estimate(&path, 2.0).unwrap().alpha_hat;
    assert_eq!(v["alpha_hat"].as_f64().unwrap().to_bits(), expected.to_bits());
}

#[test]
fn tests_report_decisions_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("x.csv");
    simulate_to(&file, &[]);
    let f = file.to_str().unwrap();
    let t = json(&lss(&["test-alpha", "--in", f, "--alpha0", "-0.1"]));
    assert!(t["z"].as_f64().unwrap().is_finite());
    assert!(t["reject"].is_boolean());
    let v = json(&lss(&["test-vol", "--in", f, "--metric", "sup", "--ci-at", "0.5"]));
    assert!(v.to_string().contains("critical_value"));
}

#[test]
fn mc_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(
        &cfg,
        "experiment = \"bias_rmse\"\nbase_seed = 5\nn_reps = 20\nalpha = [0.0]\nn = [100]\n",
    )
    .unwrap();
    let run = |sub: &str, workers: &str| {
        let out_dir = dir.path().join(sub);
        fs::create_dir_all(&out_dir).unwrap();
        let out = lss(&[
            "mc",
            "--config",
            cfg.to_str().unwrap(),
            "--workers",
            workers,
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let written = String::from_utf8(out.stdout).unwrap();
        fs::read(written.trim()).unwrap()
    };
    assert_eq!(run("one", "1"), run("three", "3"));
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    // parameter outside the domain
    assert_eq!(
        code(&lss(&["simulate", "--alpha", "0.7", "--n", "10", "--seed", "1"])),
        2
    );
    // malformed command line
    assert_eq!(code(&lss(&["simulate", "--alpha", "0.1"])), 2);
    // missing input file
    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&lss(&["estimate-alpha", "--in", missing.to_str().unwrap()])), 3);
    // non-equidistant grid
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "t,x\n0,0\n0.1,1\n0.3,0\n0.4,2\n0.5,1\n").unwrap();
    assert_eq!(code(&lss(&["estimate-alpha", "--in", bad.to_str().unwrap()])), 3);
    // too short for second differences at frequency two
    let short = dir.path().join("short.csv");
    fs::write(&short, "t,x\n0,0\n1,1\n2,0\n").unwrap();
    assert_eq!(code(&lss(&["estimate-alpha", "--in", short.to_str().unwrap()])), 3);
}

#[test]
fn error_curve_writes_documented_header() {
    let out = lss(&["error-curve", "--alpha", "-0.25,0.25", "--n-list", "20,200"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("N,alpha,lambda,c1,c2,c3,mse,rmse\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn closed_form_critvals_need_no_seed() {
    let out = lss(&["critvals", "--closed-form", "--metric", "sup", "--levels", "0.05"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("1.358"), "{text}");
    assert_eq!(code(&lss(&["critvals", "--metric", "sup"])), 2);
}
