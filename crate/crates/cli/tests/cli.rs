use std::path::Path;
use std::process::{Command, Output};

use mixfrac::estimate::{full_report, EstimateOptions, EstimateReport, Regime};
use mixfrac::simulate::{read_series, sample_mfbm, SampleMethod};
use mixfrac::{Hurst, KernelTable, ModelTheta};

fn mixfrac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixfrac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn kernels_prints_gamma_row() {
    let o = mixfrac(&["kernels", "--h", "0.3", "--lags", "4"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("1, -0.2421"), "{first}");
    let o = mixfrac(&["kernels", "--h", "0.3", "--lags", "4", "--json"]);
    let t: KernelTable = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(t, KernelTable::new(Hurst::new(0.3).unwrap(), 4, 10_000).unwrap());
}

#[test]
fn simulate_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.bin");
    let o = mixfrac(&[
        "simulate", "--theta", "0.3,1,0.5,1", "--n", "1024", "--seed", "5", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let theta = ModelTheta::new(0.3, 1.0, 0.5, 1.0).unwrap();
    let direct = sample_mfbm(theta, 1024, 1.0 / 1024.0, 5, SampleMethod::Circulant).unwrap();
    assert_eq!(read_series(&out, None).unwrap(), direct);
}

#[test]
fn simulate_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.csv");
    let report = dir.path().join("r.json");
    let o = mixfrac(&[
        "simulate", "--theta", "0.3,1,0.5,1", "--n", "16384", "--seed", "2", "--out", path(&data),
    ]);
    assert!(o.status.success());
    let o = mixfrac(&[
        "estimate", "--in", path(&data), "--regime", "rough", "--level", "0.99", "--out",
        path(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = EstimateReport::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let ci = r.h.ci.unwrap();
    assert!(ci[0] <= 0.3 && 0.3 <= ci[1], "{ci:?}");
    // thin adapter: same numbers as a direct call
    let series = read_series(&data, None).unwrap();
    let opts = EstimateOptions {
        level: 0.99,
        ..EstimateOptions::with_regime(Regime::Rough)
    };
    assert_eq!(full_report(&series, &opts).unwrap(), r);
}

#[test]
fn empty_input_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = mixfrac(&["estimate", "--in", path(&empty)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse"));
}

#[test]
fn usage_errors_exit_two_and_name_the_flag() {
    let o = mixfrac(&["kernels", "--h", "0.3", "--lags", "4", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--bogus"));
    let o = mixfrac(&["simulate", "--theta", "0.3,1", "--n", "8", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--theta"));
    let o = mixfrac(&["estimate", "--in", "x.csv", "--regime", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one() {
    let o = mixfrac(&["kernels", "--h", "1.5", "--lags", "4"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mixfrac(&["estimate", "--in", "/nonexistent/file.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    for sub in ["simulate", "estimate", "rates", "coverage", "bias", "kl", "kernels"] {
        let o = mixfrac(&[sub, "--help"]);
        assert!(o.status.success(), "{sub}");
    }
}

#[test]
fn experiment_subcommand_runs_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("kl.json");
    let out = dir.path().join("kl.csv");
    std::fs::write(
        &cfg,
        r#"{"experiment": "kl",
            "model": {"kind": "parametric", "theta": {"h": 0.3, "sigma_sq": 1.0, "lambda_cov": 0.5, "pi_total": 1.0}},
            "n_grid": [64, 128], "replications": 1, "seed": 1, "kl": {"r0": 0.05}}"#,
    )
    .unwrap();
    let o = mixfrac(&["kl", "--config", path(&cfg), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.exists() && dir.path().join("kl.json").exists());
    // a kl config given to another subcommand is rejected
    let o = mixfrac(&["rates", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
}
