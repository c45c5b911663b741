//! End-to-end checks of the binary: exit codes, determinism, and the wire
//! formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fsdim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fsdim"))
}

fn fig1_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../machines/fig1.fsm")
}

fn stdout(output: &Output) -> &str {
    std::str::from_utf8(&output.stdout).unwrap()
}

#[test]
fn gen_prints_the_champernowne_prefix() {
    let output = fsdim()
        .args(["gen", "--gen", "champernowne", "-n", "10"])
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(stdout(&output), "0110111001\n");
}

#[test]
fn stationary_of_the_example_machine_is_uniform() {
    let output = fsdim()
        .args([
            "stationary",
            "--machine",
            fig1_path().to_str().unwrap(),
            "--oracle",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value = serde_json::from_str(stdout(&output)).unwrap();
    let pi = doc["report"]["stationary"].as_array().unwrap();
    for v in pi {
        assert!((v.as_f64().unwrap() - 0.25).abs() < 1e-9);
    }
    assert!(doc["report"]["oracle"]["l1_gap"].as_f64().unwrap() < 1e-9);
    assert_eq!(doc["config"]["command"], "stationary");
}

#[test]
fn identical_invocations_produce_identical_bytes() {
    let run = || {
        fsdim()
            .args([
                "dim",
                "--gen",
                "diluted:champernowne",
                "-n",
                "20000",
                "--family",
                "blocks:2+phase:2",
            ])
            .output()
            .unwrap()
    };
    let first = run();
    let second = run();
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn dim_report_carries_config_and_upper_bound_label() {
    let output = fsdim()
        .args([
            "dim", "--gen", "zeros", "-n", "5000", "--oracle", "--blocks", "4",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value = serde_json::from_str(stdout(&output)).unwrap();
    assert_eq!(doc["config"]["family"], "blocks:4+phase:2");
    assert_eq!(doc["config"]["cluster_tol"], 0.02);
    assert_eq!(doc["report"]["dim_est"], 0.0);
    assert_eq!(
        doc["report"]["diagnostics"]["estimate_kind"],
        "dim_upper_bound"
    );
    assert_eq!(doc["report"]["block_entropy"]["dim_est"], 0.0);
}

#[test]
fn select_override_recovers_the_inner_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let selected = dir.path().join("selected.txt");
    let output = fsdim()
        .args([
            "select",
            "--machine",
            fig1_path().to_str().unwrap(),
            "--select",
            "a,c",
            "--gen",
            "diluted:champernowne",
            "-n",
            "20",
            "--out-selected",
            selected.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value = serde_json::from_str(stdout(&output)).unwrap();
    assert_eq!(doc["report"]["lambda"], 0.5);
    assert_eq!(doc["report"]["selected_len"], 10);
    assert_eq!(std::fs::read_to_string(&selected).unwrap(), "0110111001");
}

#[test]
fn agafonov_reports_a_verdict() {
    let output = fsdim()
        .args([
            "agafonov",
            "--machine",
            fig1_path().to_str().unwrap(),
            "--select",
            "a",
            "--gen",
            "diluted:champernowne",
            "-n",
            "20000",
            "--family",
            "blocks:2+phase:2",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value = serde_json::from_str(stdout(&output)).unwrap();
    assert_eq!(doc["report"]["lambda"], 0.25);
    assert_eq!(doc["report"]["verdict"]["kind"], "fails_by");
    assert!(doc["report"]["lower_bound"]["state_gap"].as_f64().unwrap() > 0.9);
}

#[test]
fn martingale_csv_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let machine = dir.path().join("bettor.fsm");
    std::fs::write(
        &machine,
        "states: s\nstart: s\ntrans: s 0 s\ntrans: s 1 s\nbet: s 1\n",
    )
    .unwrap();
    let output = fsdim()
        .args([
            "martingale",
            "--machine",
            machine.to_str().unwrap(),
            "--gen",
            "zeros",
            "-n",
            "8",
            "--checkpoints",
            "list:4,8",
            "--format",
            "csv",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(stdout(&output), "n,log2_capital\n4,4\n8,8\n");

    let output = fsdim()
        .args([
            "martingale",
            "--machine",
            machine.to_str().unwrap(),
            "--gen",
            "zeros",
            "-n",
            "8",
            "--oracle",
        ])
        .output()
        .unwrap();
    let doc: serde_json::Value = serde_json::from_str(stdout(&output)).unwrap();
    assert_eq!(doc["report"]["final_log2_capital"], 8.0);
    assert!(
        doc["report"]["oracle"]["product_recursion_max_gap"]
            .as_f64()
            .unwrap()
            < 1e-9
    );
}

#[test]
fn gen_roundtrips_through_packed_files() {
    let dir = tempfile::tempdir().unwrap();
    let packed = dir.path().join("seq.bits");
    let status = fsdim()
        .args([
            "gen",
            "--gen",
            "champernowne",
            "-n",
            "64",
            "--out",
            packed.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let output = fsdim()
        .args(["gen", "--file", packed.to_str().unwrap(), "-n", "64"])
        .output()
        .unwrap();
    let direct = fsdim()
        .args(["gen", "--gen", "champernowne", "-n", "64"])
        .output()
        .unwrap();
    assert_eq!(output.stdout, direct.stdout);
}

#[test]
fn missing_source_is_a_usage_error() {
    let output = fsdim().args(["dim", "-n", "100"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("usage error"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let output = fsdim().args(["dim", "--no-such-flag"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn unreadable_machine_file_is_a_data_error() {
    let output = fsdim()
        .args(["stationary", "--machine", "/nonexistent/machine.fsm"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert_eq!(
        stderr.lines().count(),
        1,
        "one-line diagnostic, got {stderr:?}"
    );
}

#[test]
fn malformed_machine_spec_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let machine = dir.path().join("broken.fsm");
    std::fs::write(
        &machine,
        "states: a b\nstart: a\ntrans: a 0 b\ntrans: a 1 b\ntrans: b 0 a\n",
    )
    .unwrap();
    let output = fsdim()
        .args(["stationary", "--machine", machine.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("missing transition"));
}

#[test]
fn file_shorter_than_n_reports_the_shortfall() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("short.txt");
    std::fs::write(&seq, "0101").unwrap();
    let output = fsdim()
        .args(["dim", "--file", seq.to_str().unwrap(), "-n", "100"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("100") && stderr.contains("4"), "{stderr}");
}

#[test]
fn analyze_traces_a_source_as_jsonl() {
    let output = fsdim()
        .args([
            "analyze",
            "--machine",
            fig1_path().to_str().unwrap(),
            "--gen",
            "champernowne",
            "-n",
            "16",
            "--checkpoints",
            "list:8,16",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let lines: Vec<&str> = stdout(&output).lines().collect();
    assert_eq!(lines.len(), 2);
    for line in lines {
        let doc: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(doc["n"].is_u64());
        assert!(doc["joint"].is_object());
    }
}
