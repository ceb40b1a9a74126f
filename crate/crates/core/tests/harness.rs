mod common;

use std::path::Path;
use std::process::Command;

use common::{check_golden, golden_config};
use quantcs::harness::config::{ExperimentConfig, Method};
use quantcs::harness::experiment::{derive_seed, run_experiment, TrialSeeds, SCHEMA_VERSION};
use serde_json::Value;

#[test]
fn miniature_report_matches_golden_file() {
    let report = run_experiment(&golden_config()).unwrap();
    assert_eq!(report.schema_version, SCHEMA_VERSION);
    check_golden(&report.to_json().unwrap()).unwrap();
}

#[test]
fn reports_are_byte_identical_across_runs_and_worker_counts() {
    let mut c = golden_config();
    let a = run_experiment(&c).unwrap().to_json().unwrap();
    let b = run_experiment(&c).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    c.workers = Some(1);
    let mut one = run_experiment(&c).unwrap();
    one.config.workers = None;
    assert_eq!(one.to_json().unwrap(), a);
}

#[test]
fn trial_seeds_depend_only_on_master_and_index() {
    let s = TrialSeeds::derive(7, 3);
    assert_eq!(s, TrialSeeds::derive(7, 3));
    assert_ne!(s, TrialSeeds::derive(7, 4));
    assert_ne!(s, TrialSeeds::derive(8, 3));
    assert_eq!(s.signal, derive_seed(7, 3, 0));
    // a longer run shares its first trials with a shorter one
    let mut c = golden_config();
    let short = run_experiment(&c).unwrap();
    c.trials = 5;
    let long = run_experiment(&c).unwrap();
    assert_eq!(short.trials[..], long.trials[..3]);
}

#[test]
fn db_fields_are_consistent() {
    let r = run_experiment(&golden_config()).unwrap();
    for t in &r.trials {
        let mse = t.mse.unwrap();
        assert!((t.mse_db.unwrap() - 10.0 * mse.log10()).abs() < 1e-12);
    }
    let s = &r.summary;
    assert!((s.median_mse_db.unwrap() - 10.0 * s.median_mse.unwrap().log10()).abs() < 1e-12);
    assert!((s.predicted_mse_db - 10.0 * s.predicted_mse.log10()).abs() < 1e-12);
}

#[test]
fn lmmse_loses_to_rbp_on_the_default_setup() {
    let base = ExperimentConfig {
        n: 400,
        trials: 2,
        ..Default::default()
    };
    let rbp = run_experiment(&base).unwrap();
    let lin = run_experiment(&ExperimentConfig {
        method: Method::Lmmse,
        ..base
    })
    .unwrap();
    assert!(lin.summary.median_mse_db.unwrap() > rbp.summary.median_mse_db.unwrap());
}

fn cli(dir: &Path, args: &[&str]) -> (i32, Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_quantcs"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let stderr = String::from_utf8(out.stderr).unwrap();
    let json = if out.status.success() {
        &stdout
    } else {
        &stderr
    };
    (
        out.status.code().unwrap(),
        serde_json::from_str(json.trim()).unwrap_or(Value::Null),
        stderr,
    )
}

#[test]
fn cli_subcommands_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let exp = d.join("exp.toml");
    std::fs::write(&exp, "n = 60\nbeta = 2.0\ntrials = 2\nt_max = 4\n").unwrap();
    let se = d.join("se.json");
    std::fs::write(&se, r#"{"beta": 2.0, "n_levels": 4, "t_max": 30}"#).unwrap();
    let design = d.join("design.toml");
    std::fs::write(
        &design,
        "beta_grid = [1.0]\n[optimizer]\nmax_evals = 60\npolish_iters = 3\n",
    )
    .unwrap();
    let sweep = d.join("sweep.toml");
    std::fs::write(&sweep, "rates = [1.0]\nbits_per_measurement = [1, 2]\ntrials = 0\ncombos = [{ method = \"rbp\", quantizer = \"uniform\" }, { method = \"lmmse\", quantizer = \"uniform\" }]\n").unwrap();

    let cases: [(&str, &Path, &[&str]); 5] = [
        ("experiment", &exp, &["report.json"]),
        ("reconstruct", &exp, &["reconstruct.json", "estimate.csv"]),
        ("se", &se, &["se_trace.csv"]),
        (
            "design",
            &design,
            &["design.json", "boundaries.csv", "quantizer.json"],
        ),
        (
            "sweep",
            &sweep,
            &["rate_sweep.csv", "rate_sweep.json", "plot_rate_sweep.py"],
        ),
    ];
    for (cmd, cfg, files) in cases {
        let (code, v, stderr) = cli(d, &[cmd, "--config", cfg.to_str().unwrap(), "--seed", "5"]);
        assert_eq!(code, 0, "{cmd}: {stderr}");
        assert_eq!(v["status"], "ok");
        for f in files {
            assert!(d.join(f).exists(), "{cmd} did not write {f}");
        }
    }
    let csv = std::fs::read_to_string(d.join("se_trace.csv")).unwrap();
    assert!(csv.starts_with("t,nu_bar,nu_bar_dB\n"));
    let csv = std::fs::read_to_string(d.join("rate_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    // same seed, same bytes
    let first = std::fs::read(d.join("report.json")).unwrap();
    let (code, _, _) = cli(
        d,
        &[
            "experiment",
            "--config",
            exp.to_str().unwrap(),
            "--seed",
            "5",
        ],
    );
    assert_eq!(code, 0);
    assert_eq!(std::fs::read(d.join("report.json")).unwrap(), first);

    // the written quantizer feeds back in as a file quantizer
    let q = d.join("quantizer.json");
    let from_file = d.join("file.toml");
    std::fs::write(
        &from_file,
        format!("n = 40\nbeta = 1.0\ntrials = 1\nt_max = 3\nquantizer = \"file\"\nquantizer_file = {:?}\n", q.to_str().unwrap()),
    )
    .unwrap();
    let (code, _, stderr) = cli(d, &["experiment", "--config", from_file.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
}

#[test]
fn cli_failures_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = d.join("bad.toml");
    std::fs::write(&bad, "n = 10\nbeta = 2.0\nbogus = 1\n").unwrap();
    let (code, v, _) = cli(d, &["experiment", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(v["error"]["kind"], "config");

    let missing = d.join("missing.toml");
    let (code, v, _) = cli(d, &["se", "--config", missing.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(v["error"]["kind"].is_string());

    let (code, v, _) = cli(d, &["experiment", "--frobnicate"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "usage");

    let (code, v, _) = cli(d, &["se", "--workers", "0"]);
    assert_eq!(code, 1);
    assert_eq!(v["error"]["kind"], "config");

    let file = d.join("file.toml");
    std::fs::write(
        &file,
        "quantizer = \"file\"\nquantizer_file = \"/nonexistent/q.json\"\n",
    )
    .unwrap();
    let (code, _, _) = cli(d, &["experiment", "--config", file.to_str().unwrap()]);
    assert_eq!(code, 1);
}
