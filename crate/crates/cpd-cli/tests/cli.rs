//! End-to-end tests driving the compiled binary: exit codes, file outputs,
//! and determinism of the benchmark pipeline.

use cpd_core::coherence::match_components;
use cpd_core::io::{load_decomposition, load_ground_truth};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cpd")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cpd-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn generate_spiked(dir: &Path) {
    let out = run_in(
        dir,
        &[
            "generate",
            "--model",
            "spiked-covariance",
            "--dims",
            "6,6",
            "--rank",
            "2",
            "--theta",
            "0.2",
            "--sigma",
            "0.5",
            "--samples",
            "300",
            "--signal",
            "6",
            "--seed",
            "7",
            "--name",
            "demo",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
}

#[test]
fn help_and_version_exit_zero() {
    for args in [vec!["--help"], vec!["--version"], vec!["fit", "--help"]] {
        let out = Command::new(bin()).args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{args:?}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = scratch("usage");
    let unknown_flag = run_in(&dir, &["verify", "--frobnicate"]);
    assert_eq!(unknown_flag.status.code(), Some(1));

    std::fs::write(dir.join("t.tns"), "shape: 2\n1\n2\n").unwrap();
    let t = dir.join("t.tns");
    let bad_method = run_in(
        &dir,
        &["fit", "--input", t.to_str().unwrap(), "--method", "oals", "--rank", "1"],
    );
    assert_eq!(bad_method.status.code(), Some(1));
    assert!(stderr_of(&bad_method).contains("unknown method"));

    let bad_prop = run_in(&dir, &["verify", "--prop", "6", "--trials", "10"]);
    assert_eq!(bad_prop.status.code(), Some(1));
    assert!(stderr_of(&bad_prop).contains("no certification"));

    let missing_init = run_in(
        &dir,
        &["fit", "--input", t.to_str().unwrap(), "--method", "ico", "--rank", "1"],
    );
    assert_eq!(missing_init.status.code(), Some(1));
}

#[test]
fn numerical_and_io_failures_exit_two() {
    let dir = scratch("fail2");
    let missing = run_in(
        &dir,
        &["fit", "--input", "no-such.tns", "--method", "cpca", "--rank", "1"],
    );
    assert_eq!(missing.status.code(), Some(2));

    // rank above the mode sizes is a module error surfaced with its text
    std::fs::write(dir.join("m.tns"), "shape: 2 2\n1\n0\n0\n1\n").unwrap();
    let m = dir.join("m.tns");
    let bad_rank = run_in(
        &dir,
        &["fit", "--input", m.to_str().unwrap(), "--method", "cpca", "--rank", "5"],
    );
    assert_eq!(bad_rank.status.code(), Some(2));
    assert!(stderr_of(&bad_rank).contains("error:"));
}

#[test]
fn generate_fit_recovers_the_truth() {
    let dir = scratch("roundtrip");
    generate_spiked(&dir);
    let tns = dir.join("demo.tns");
    let fit = run_in(
        &dir,
        &[
            "fit",
            "--input",
            tns.to_str().unwrap(),
            "--method",
            "cpca+ico",
            "--rank",
            "2",
            "--symmetric",
            "--trace",
        ],
    );
    assert_eq!(fit.status.code(), Some(0), "{}", stderr_of(&fit));
    let est = load_decomposition(&dir.join("demo-cpca+ico.json")).unwrap();
    let truth = load_ground_truth(&dir.join("demo-truth.json")).unwrap();
    let matched = match_components(&est, &truth.decomposition).unwrap();
    assert!(matched.max_error < 0.2, "error {}", matched.max_error);
    let trace = std::fs::read_to_string(dir.join("demo-cpca+ico-trace.csv")).unwrap();
    assert!(trace.lines().count() >= 2);
}

#[test]
fn standalone_ico_refines_a_saved_initialization() {
    let dir = scratch("warmstart");
    generate_spiked(&dir);
    let tns = dir.join("demo.tns");
    let cpca = run_in(
        &dir,
        &[
            "fit",
            "--input",
            tns.to_str().unwrap(),
            "--method",
            "cpca",
            "--rank",
            "2",
            "--symmetric",
        ],
    );
    assert_eq!(cpca.status.code(), Some(0), "{}", stderr_of(&cpca));
    let init = dir.join("demo-cpca.json");
    let ico = run_in(
        &dir,
        &[
            "fit",
            "--input",
            tns.to_str().unwrap(),
            "--method",
            "ico",
            "--rank",
            "2",
            "--symmetric",
            "--init",
            init.to_str().unwrap(),
        ],
    );
    assert_eq!(ico.status.code(), Some(0), "{}", stderr_of(&ico));
    let truth = load_ground_truth(&dir.join("demo-truth.json")).unwrap();
    let cpca_err = match_components(&load_decomposition(&init).unwrap(), &truth.decomposition)
        .unwrap()
        .max_error;
    let ico_err = match_components(
        &load_decomposition(&dir.join("demo-ico.json")).unwrap(),
        &truth.decomposition,
    )
    .unwrap()
    .max_error;
    assert!(ico_err <= cpca_err + 1e-12, "ico {ico_err} vs cpca {cpca_err}");
}

#[test]
fn diagnose_emits_coherence_and_rates() {
    let dir = scratch("diagnose");
    generate_spiked(&dir);
    let truth = dir.join("demo-truth.json");
    let out = run_in(&dir, &["diagnose", "--truth", truth.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("demo-truth-diagnostics.json")).unwrap())
            .unwrap();
    assert!(doc["coherence"]["delta_s"].is_number());
    assert!(doc["rates"]["snr"].is_number() || doc["rates"]["snr"].is_string());
}

#[test]
fn verify_reports_pass_in_both_formats() {
    let dir = scratch("verify");
    let json = run_in(
        &dir,
        &["verify", "--prop", "3", "--trials", "40", "--seed", "5"],
    );
    assert_eq!(json.status.code(), Some(0), "{}", stderr_of(&json));
    assert!(stdout_of(&json).contains("prop 3: PASS"));
    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("verify-report.json")).unwrap())
            .unwrap();
    assert_eq!(reports[0]["proposition"], 3);
    assert_eq!(reports[0]["pass"], true);

    let csv = run_in(
        &dir,
        &[
            "verify", "--prop", "1", "--prop", "3", "--trials", "30", "--seed", "5", "--format",
            "csv",
        ],
    );
    assert_eq!(csv.status.code(), Some(0), "{}", stderr_of(&csv));
    let text = std::fs::read_to_string(dir.join("verify-report.csv")).unwrap();
    assert!(text.starts_with("proposition,pass,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn verify_honors_the_thread_env_var() {
    let dir = scratch("threads");
    let out = Command::new(bin())
        .arg("--out-dir")
        .arg(&dir)
        .args(["verify", "--prop", "1", "--trials", "30", "--seed", "2"])
        .env("CPD_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
}

#[test]
fn bench_is_deterministic_and_seed_overridable() {
    let dir = scratch("bench");
    let config = dir.join("tiny.toml");
    std::fs::write(
        &config,
        r#"
            name = "tiny"
            model = "noisy-cp"
            dims = [5, 5, 5]
            rank = 2
            theta = 0.2
            sigma = 0.01
            signal_grid = [3.0]
            replicates = 2
            methods = ["cpca", "cpca+ico"]
            seed = 11
        "#,
    )
    .unwrap();
    let first = run_in(&dir, &["bench", "--config", config.to_str().unwrap()]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr_of(&first));
    let rows = std::fs::read_to_string(dir.join("tiny-rows.csv")).unwrap();
    assert!(std::fs::metadata(dir.join("tiny-summary.json")).is_ok());

    let again = run_in(&dir, &["bench", "--config", config.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(rows, std::fs::read_to_string(dir.join("tiny-rows.csv")).unwrap());

    let reseeded = run_in(
        &dir,
        &["bench", "--config", config.to_str().unwrap(), "--seed", "12"],
    );
    assert_eq!(reseeded.status.code(), Some(0));
    assert_ne!(rows, std::fs::read_to_string(dir.join("tiny-rows.csv")).unwrap());

    let json_rows = run_in(
        &dir,
        &[
            "bench",
            "--config",
            config.to_str().unwrap(),
            "--format",
            "json",
        ],
    );
    assert_eq!(json_rows.status.code(), Some(0));
    let rows_doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("tiny-rows.json")).unwrap())
            .unwrap();
    assert_eq!(rows_doc.as_array().unwrap().len(), 4);
}
