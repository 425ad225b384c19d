//! End-to-end runs of the `broadcast` binary.

use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_broadcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

#[test]
fn bowles_reports_both_links() {
    let r = report(&["bowles"]);
    let scores = r["results"]["link_scores"].as_array().unwrap();
    assert_eq!(scores.len(), 2);
    for s in scores {
        assert!((s.as_f64().unwrap() - 6.0 * 2f64.sqrt()).abs() < 1e-9);
    }
    assert_eq!(r["results"]["classical_bound"].as_f64(), Some(6.0));
    report(&["bowles", "--transposed"]);
    report(&["bowles", "--source", "maximally-mixed"]);
}

#[test]
fn witness_values() {
    let r = report(&["witness", "--source", "singlet"]);
    assert!((r["results"]["functional"].as_f64().unwrap() + 1.0 / 32.0).abs() < 1e-12);
    assert!((r["results"]["quarter_trace"].as_f64().unwrap() + 0.125).abs() < 1e-12);
    assert_eq!(r["results"]["entangled"], Value::Bool(true));
    let r = report(&["witness", "--source", "werner:0.5"]);
    assert!((r["results"]["trace"].as_f64().unwrap() + 0.125).abs() < 1e-12);
}

#[test]
fn errors_exit_with_two() {
    for args in [
        &["witness", "--source", "product:|00>"][..],
        &["witness", "--source", "nonsense"],
        &["pt-spectrum", "--mask", "5"],
        &["selftest", "--source", "ghz:3", "--parties", "2"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn failed_checks_exit_with_one() {
    // a tolerance below the achievable residual fails the maximality checks
    let out = run(&["bowles", "--tol=-1"]);
    assert_eq!(out.status.code(), Some(1));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["passed"] == Value::Bool(false)));
}

#[test]
fn sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let r = report(&[
        "werner-sweep",
        "--grid",
        "0:1:0.01",
        "--csv",
        path.to_str().unwrap(),
    ]);
    assert_eq!(r["results"]["first_detected"].as_f64(), Some(0.34));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("v,min_pt_eig,I,quarter_trace,detected"));
    assert_eq!(lines.next(), Some("0,0.25,,,false"));
    assert_eq!(text.lines().count(), 102);
}

#[test]
fn selftest_and_spectrum() {
    let r = report(&["selftest", "--source", "w:3", "--mix", "0.5"]);
    assert_eq!(r["results"]["pure_refinement"]["passed"], Value::Bool(true));
    let r = report(&["pt-spectrum", "--source", "product:|00>"]);
    assert_eq!(r["results"]["max"].as_f64(), Some(1.0));
    assert_eq!(r["results"]["top_is_product"], Value::Bool(true));
}

#[test]
fn state_files_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rho.json");
    std::fs::write(
        &path,
        r#"{"dims":[2,2],"re":[[0,0,0,0],[0,0.5,-0.5,0],[0,-0.5,0.5,0],[0,0,0,0]],"im":[[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]}"#,
    )
    .unwrap();
    let spec = format!("file:{}", path.display());
    let r = report(&["witness", "--source", &spec]);
    assert!((r["results"]["functional"].as_f64().unwrap() + 1.0 / 32.0).abs() < 1e-12);

    std::fs::write(
        &path,
        r#"{"dims":[2],"re":[[1,0],[0,1]],"im":[[0,0],[0,0]]}"#,
    )
    .unwrap();
    assert_eq!(run(&["witness", "--source", &spec]).status.code(), Some(2));
}
