//! Black-box tests of the command-line binary: exit codes, determinism,
//! manifests, and the documented output files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resntk"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn kernel_smoke_writes_matrix_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "kernel", "--act", "relu,relu", "--skips", "0", "--n", "8", "--d", "4",
        "--seed", "1", "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let csv = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 8);
    let summary = read_json(&dir.path().join("kernel_summary.json"));
    assert!(summary["lambda_min"].as_f64().unwrap() >= 0.0);
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "kernel");
    assert_eq!(manifest["seed"], 1);
    assert!(manifest["library_version"].is_string());
}

#[test]
fn kernel_reruns_are_byte_identical() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let out = run(&[
            "kernel", "--act", "tanh,relu", "--skips", "1", "--n", "6", "--d", "4",
            "--seed", "9", "--output-dir", d.path().to_str().unwrap(),
        ]);
        assert_code(&out, 0);
    }
    assert_eq!(
        fs::read(d1.path().join("kernel.csv")).unwrap(),
        fs::read(d2.path().join("kernel.csv")).unwrap()
    );
}

#[test]
fn architecture_length_mismatch_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "kernel", "--act", "relu", "--depth", "4", "--n", "4", "--d", "4",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--act"), "unhelpful message: {err}");
}

#[test]
fn bad_skip_string_and_bad_mode_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "kernel", "--act", "relu,relu", "--skips", "2", "--n", "4", "--d", "4",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 2);
    let out = run(&[
        "search", "--mode", "bogus", "--m", "2", "--k", "1", "--n", "16", "--d", "4",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn sweep_depth_range_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep", "--l-min", "2", "--l-max", "5", "--n", "4", "--d", "4",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 2);
    let out = run(&[
        "sweep", "--l-min", "3", "--l-max", "13", "--n", "4", "--d", "4",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn divergent_training_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train", "--act", "relu,relu", "--skips", "1", "--width", "32",
        "--n", "64", "--d", "8", "--gamma", "1e9", "--epochs", "2",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 4);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("iteration"), "divergence report lacks the iteration: {err}");
}

#[test]
fn single_pass_mode_stores_one_iterate_and_full_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train", "--act", "relu,tanh", "--skips", "1", "--width", "16",
        "--n", "32", "--d", "6", "--gamma", "0.3", "--mode", "algorithm1",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    // One stored parameter snapshot, one loss per visited sample.
    assert!(dir.path().join("params.bin").exists());
    let loss = fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 1 + 32);
    let report = read_json(&dir.path().join("train_report.json"));
    assert_eq!(report["iterations"], 32);
}

#[test]
fn kappa_derives_and_records_the_step_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train", "--act", "relu,relu", "--skips", "0", "--width", "32",
        "--n", "32", "--d", "6", "--kappa", "0.1", "--lambda-min", "0.5",
        "--epochs", "1", "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let report = read_json(&dir.path().join("train_report.json"));
    assert_eq!(report["gamma_source"], "kappa=0.1");
    let gamma = report["gamma"].as_f64().unwrap();
    assert!(gamma > 0.0 && gamma < 1.0, "derived gamma {gamma}");
    // kappa without a spectrum estimate is an input error.
    let out = run(&[
        "train", "--act", "relu,relu", "--skips", "0", "--n", "16", "--d", "4",
        "--kappa", "0.1", "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn convergence_manifest_records_the_matching_convention() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "convergence", "--act", "relu,relu", "--skips", "0", "--widths", "32,64",
        "--seeds", "2", "--n", "6", "--d", "4", "--quad-order", "64",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["config"]["convention"], "kernel_matched");
    let csv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    // Two widths x (two seeds + one mean row) + header.
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
}

#[test]
fn output_dir_env_var_is_honored_and_flag_wins() {
    let dir_env = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["bounds", "--act", "relu,relu", "--skips", "0", "--n", "30", "--d", "3"])
        .env("RESNTK_OUTPUT_DIR", dir_env.path())
        .output()
        .unwrap();
    assert_code(&out, 0);
    assert!(dir_env.path().join("bounds.json").exists());

    let dir_flag = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "bounds", "--act", "relu,relu", "--skips", "0", "--n", "30", "--d", "3",
            "--output-dir", dir_flag.path().to_str().unwrap(),
        ])
        .env("RESNTK_OUTPUT_DIR", dir_env.path())
        .output()
        .unwrap();
    assert_code(&out, 0);
    assert!(dir_flag.path().join("bounds.json").exists());
}

#[test]
fn bounds_report_matches_the_hand_value() {
    // All-ReLU depth 3, fully connected, N/d = 10: the diagonal upper
    // bound evaluates to exactly 30.
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "bounds", "--act", "relu,relu", "--skips", "0", "--n", "30", "--d", "3",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let report = read_json(&dir.path().join("bounds.json"));
    let upper = report["lambda_min_upper"].as_f64().unwrap();
    assert!((upper - 30.0).abs() < 1e-9, "upper bound {upper}");
    assert_eq!(report["data_gram_vacuous"], true);
    assert!(report["c2"].as_f64().unwrap() > 0.0);
}

#[test]
fn threads_flag_does_not_change_kernel_output() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for (d, threads) in [(&d1, "1"), (&d2, "4")] {
        let out = run(&[
            "kernel", "--act", "tanh,swish", "--skips", "1", "--n", "6", "--d", "4",
            "--seed", "3", "--threads", threads,
            "--output-dir", d.path().to_str().unwrap(),
        ]);
        assert_code(&out, 0);
    }
    assert_eq!(
        fs::read(d1.path().join("kernel.csv")).unwrap(),
        fs::read(d2.path().join("kernel.csv")).unwrap()
    );
}
