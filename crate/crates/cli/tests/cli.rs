use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sln-harmonic"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn decompose_identity() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "id.json", "[[1,0,0],[0,1,0],[0,0,1]]");
    let out = run(&["decompose", "--input", &input]);
    assert!(out.status.success());
    let v = json(&out);
    let id = serde_json::json!([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    for key in ["K", "A", "N"] {
        assert_eq!(v[key], id);
    }
}

#[test]
fn decompose_rejects_determinant() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "g.json", "[[2,0],[0,1]]");
    let target = dir.path().join("out.json");
    let out = run(&["decompose", "--input", &input, "--output", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!target.exists());
}

#[test]
fn catalan_table() {
    let out = run(&["catalan", "--max", "4"]);
    assert!(out.status.success());
    assert_eq!(json(&out), serde_json::json!([1, 1, 2, 5]));
    let out = run(&["catalan", "--max", "4", "--format", "csv"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "j,f\n1,1\n2,1\n3,2\n4,5\n");
}

#[test]
fn malformed_json_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.json", "{\"x\": [[0,1],\n [0,0]],\n \"y\": [[0,1] [0,0]]}");
    let out = run(&["beta", "--input", &input]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn bad_flag_value_is_validation_error() {
    let out = run(&["check-reductivity", "--m", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn beta_alpha_self_null_in_sl2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "b.json", r#"{"x": [[0.5, 2], [0, -0.5]], "y": [[0.5, 2], [0, -0.5]]}"#);
    let out = run(&["beta", "--input", &input, "--connection", "alpha", "--n", "2"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["beta"], serde_json::json!([[0.0, 0.0], [0.0, 0.0]]));
}

#[test]
fn harmonic_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = Vec::new();
    let mut y = Vec::new();
    for i in 0..7 {
        for j in 0..7 {
            let (u, v) = (1.0 + 0.1 * i as f64, 0.1 * j as f64);
            a.push(vec![u * u - v * v]);
            y.push(vec![u * v]);
        }
    }
    let map = serde_json::json!({ "n": 2, "d": 2, "dims": [7, 7], "spacing": [0.1, 0.1], "a": a, "y": y });
    let input = write(dir.path(), "map.json", &map.to_string());
    let out = run(&["harmonic", "--input", &input, "--connection", "alpha"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "i0,i1,a1,y1_2,norm");
    assert_eq!(csv.lines().count(), 1 + 9);

    let out = run(&["harmonic", "--input", &input, "--format", "json"]);
    let summary = json(&out);
    assert!(summary["sup_norm"].as_f64().unwrap() < 1e-10);
}

#[test]
fn geodesic_compare_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "g.json", r#"{"v0": [[0,1,2],[0,0,-1],[0,0,0]]}"#);
    let out = run(&["geodesic", "--input", &input, "--compare", "nplus-oracle", "--format", "json"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["comparison"]["agrees"], true);
    assert_eq!(v["samples"], 1001);

    let out = run(&["geodesic", "--input", &input, "--steps", "4"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("t,a1,a2,y1_2,y1_3,y2_3,"));
}

#[test]
fn geodesic_rejects_velocity_outside_m() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "g.json", r#"{"v0": [[0,0],[1,0]]}"#);
    let out = run(&["geodesic", "--input", &input]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
}

#[test]
fn verify_paper_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("r1.json");
    let second = dir.path().join("r2.json");
    for target in [&first, &second] {
        let out = run(&["verify-paper", "--seed", "42", "--output", target.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(&first).unwrap();
    let b = fs::read(&second).unwrap();
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let verdict = |id: &str| {
        report["claims"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["id"] == id)
            .unwrap()["verdict"]
            .clone()
    };
    assert_eq!(verdict("symmetric-harmonic-coordinates"), "reproduced");
    assert_eq!(verdict("sl2-harmonic-coordinates"), "reproduced");
    assert_eq!(verdict("nplus-closed-form"), "discrepant");
}
