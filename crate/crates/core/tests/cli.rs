//! End-to-end checks of the `levsample` binary: wire formats, seed
//! resolution, and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

use levsample::harness::ExperimentReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levsample"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("levsample_cli_tests").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "command failed: {}\n{}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn gen_probs_estimate_diagnose_pipeline() {
    let dir = tmp_dir("pipeline");
    let data = dir.join("synth.csv");

    let output = bin()
        .args([
            "gen", "--dist", "t3", "--n", "300", "--p", "5", "--seed", "7",
        ])
        .arg("--out")
        .arg(&data)
        .output()
        .unwrap();
    assert_ok(&output);
    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 300);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 6);

    let pi_path = dir.join("pi.csv");
    let output = bin()
        .args(["probs", "--response", "0", "--scheme", "icnlev"])
        .arg("--input")
        .arg(&data)
        .arg("--out")
        .arg(&pi_path)
        .output()
        .unwrap();
    assert_ok(&output);
    let pi_text = std::fs::read_to_string(&pi_path).unwrap();
    let mut lines = pi_text.lines();
    assert_eq!(lines.next().unwrap(), "row,pi");
    let total: f64 = lines
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-10, "pi sums to {total}");

    let est_path = dir.join("est.json");
    let output = bin()
        .args([
            "estimate",
            "--response",
            "0",
            "--scheme",
            "ic",
            "--r",
            "80",
            "--seed",
            "42",
            "--ci",
            "0.95",
        ])
        .arg("--input")
        .arg(&data)
        .arg("--out")
        .arg(&est_path)
        .output()
        .unwrap();
    assert_ok(&output);
    let est: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&est_path).unwrap()).unwrap();
    assert_eq!(est["r"], 80);
    assert_eq!(est["seed"], 42);
    assert_eq!(est["beta_tilde"].as_array().unwrap().len(), 5);
    assert_eq!(est["intervals"].as_array().unwrap().len(), 5);

    let output = bin()
        .args([
            "diagnose",
            "--response",
            "0",
            "--scheme",
            "blev",
            "--r",
            "100",
        ])
        .arg("--input")
        .arg(&data)
        .output()
        .unwrap();
    assert_ok(&output);
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("lambda_min"));
    assert!(text.contains("r/n"));
}

#[test]
fn experiment_runs_from_json_config() {
    let dir = tmp_dir("experiment");
    let config_path = dir.join("exp.json");
    std::fs::write(
        &config_path,
        r#"{
            "mode": "conditional",
            "data": {"synthetic": {"dist": "mn", "n": 200, "p": 4, "seed": 3}},
            "schemes": [{"kind": "unif"}, {"kind": "rlnlev"}],
            "target": "fit",
            "sample_sizes": [40, 80],
            "replicates": 25,
            "master_seed": 9
        }"#,
    )
    .unwrap();

    let csv_path = dir.join("report.csv");
    let output = bin()
        .arg("experiment")
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(&csv_path)
        .output()
        .unwrap();
    assert_ok(&output);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("scheme,r,squared_bias,variance,mse,failed\n"));
    assert_eq!(csv.lines().count(), 5);

    let json_path = dir.join("report.json");
    let output = bin()
        .arg("experiment")
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(&json_path)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert_ok(&output);
    let report =
        ExperimentReport::from_json(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(report.cells.len(), 4);
    assert_eq!(report.config.master_seed, 9);
}

#[test]
fn thread_count_flag_does_not_change_reports() {
    let dir = tmp_dir("threads");
    let config_path = dir.join("exp.json");
    std::fs::write(
        &config_path,
        r#"{
            "mode": "conditional",
            "data": {"synthetic": {"dist": "mn", "n": 400, "p": 4, "seed": 8}},
            "schemes": [{"kind": "unif"}, {"kind": "ic"}, {"kind": "plnlev"}],
            "target": "coef",
            "sample_sizes": [50, 100],
            "replicates": 40,
            "master_seed": 77
        }"#,
    )
    .unwrap();

    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let path = dir.join(format!("report_{threads}.csv"));
        let output = bin()
            .args(["--threads", threads, "experiment"])
            .arg("--config")
            .arg(&config_path)
            .arg("--out")
            .arg(&path)
            .output()
            .unwrap();
        assert_ok(&output);
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "reports differ across --threads");
}

#[test]
fn env_var_seed_matches_flag_seed() {
    let dir = tmp_dir("seeds");
    let data = dir.join("data.csv");
    bin()
        .args([
            "gen", "--dist", "mn", "--n", "120", "--p", "4", "--seed", "1",
        ])
        .arg("--out")
        .arg(&data)
        .output()
        .unwrap();

    let flagged = bin()
        .args([
            "estimate",
            "--response",
            "0",
            "--scheme",
            "pl",
            "--r",
            "30",
            "--seed",
            "55",
        ])
        .arg("--input")
        .arg(&data)
        .env_remove("LEVSAMPLE_SEED")
        .output()
        .unwrap();
    assert_ok(&flagged);

    let via_env = bin()
        .args(["estimate", "--response", "0", "--scheme", "pl", "--r", "30"])
        .arg("--input")
        .arg(&data)
        .env("LEVSAMPLE_SEED", "55")
        .output()
        .unwrap();
    assert_ok(&via_env);
    assert_eq!(flagged.stdout, via_env.stdout);

    // The flag wins over the environment.
    let both = bin()
        .args([
            "estimate",
            "--response",
            "0",
            "--scheme",
            "pl",
            "--r",
            "30",
            "--seed",
            "55",
        ])
        .arg("--input")
        .arg(&data)
        .env("LEVSAMPLE_SEED", "999")
        .output()
        .unwrap();
    assert_ok(&both);
    assert_eq!(flagged.stdout, both.stdout);
}

#[test]
fn exit_codes_distinguish_input_and_numerical_failures() {
    // Missing file: input error.
    let output = bin()
        .args([
            "probs",
            "--input",
            "/definitely/not/here.csv",
            "--response",
            "0",
        ])
        .args(["--scheme", "ic"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    // Rank-deficient design: numerical failure.
    let dir = tmp_dir("exit_codes");
    let bad = dir.join("collinear.csv");
    std::fs::write(&bad, "1,2,4\n2,4,8\n3,6,12\n4,1,2\n").unwrap();
    let output = bin()
        .args(["probs", "--response", "0", "--scheme", "blev"])
        .arg("--input")
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&output.stderr).contains("rank deficient"));

    // Unknown scheme: usage error from the parser.
    let output = bin()
        .args([
            "probs",
            "--input",
            "x.csv",
            "--response",
            "0",
            "--scheme",
            "bogus",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn header_and_expansion_flags() {
    let dir = tmp_dir("flags");
    let data = dir.join("with_header.csv");
    std::fs::write(
        &data,
        "y,a,b\n1.0,2.0,3.0\n2.0,1.0,4.0\n0.5,3.0,1.0\n1.5,2.5,2.5\n2.5,0.5,1.5\n3.0,1.5,0.5\n",
    )
    .unwrap();

    // Without --header the first line fails to parse.
    let output = bin()
        .args(["probs", "--response", "0", "--scheme", "unif"])
        .arg("--input")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("non-numeric"));

    // With --header, --intercept and --expand the fit sees 1 + 2 + 2 + 1
    // predictor columns; estimate reports that many coordinates.
    let output = bin()
        .args([
            "estimate",
            "--response",
            "0",
            "--scheme",
            "unif",
            "--r",
            "6",
            "--seed",
            "1",
            "--header",
            "--intercept",
            "--expand",
        ])
        .arg("--input")
        .arg(&data)
        .output()
        .unwrap();
    assert_ok(&output);
    let est: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&output.stdout)).unwrap();
    assert_eq!(est["beta_tilde"].as_array().unwrap().len(), 6);
}
