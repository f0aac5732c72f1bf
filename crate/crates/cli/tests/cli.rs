use std::path::Path;
use std::process::{Command, Output};

fn servolab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_servolab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn servolab")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = servolab(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&servolab(d, &["--version"])), 0);
    assert_eq!(code(&servolab(d, &["--help"])), 0);
    assert_eq!(code(&servolab(d, &["frobnicate"])), 1);
    assert_eq!(code(&servolab(d, &["render", "--alpha", "x", "--theta", "0", "--out", "f.pgm"])), 1);
    assert_eq!(code(&servolab(d, &["simulate", "--mode", "bogus"])), 1);
    assert_eq!(code(&servolab(d, &["encrypt", "--in", "missing.pgm", "--out", "c.pgm"])), 2);
    std::fs::write(d.join("bad.pgm"), b"P5\n4 4\n255\nabc").unwrap();
    assert_eq!(code(&servolab(d, &["extract", "--in", "bad.pgm"])), 2);
    // an unstable scalar-like demand: no certificate exists for λ̄ = 10 s
    let out = servolab(d, &["certify", "search", "--lambda-upper", "10", "--iters", "40"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn frame_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["render", "--alpha", "0.05", "--theta", "-0.1", "--out", "f.pgm"]);
    let est: serde_json::Value = serde_json::from_str(&ok(d, &["extract", "--in", "f.pgm"])).unwrap();
    assert!((est["theta"].as_f64().unwrap() + 0.1).abs() <= 0.01);
    assert!((est["alpha"].as_f64().unwrap() - 0.05).abs() <= 0.004);

    ok(d, &["encrypt", "--in", "f.pgm", "--out", "c.pgm", "--rounds", "2"]);
    let header: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("c.pgm.json")).unwrap()).unwrap();
    assert_eq!(header["rounds"], 2);
    ok(d, &["decrypt", "--in", "c.pgm", "--out", "p.pgm"]);
    assert_eq!(std::fs::read(d.join("f.pgm")).unwrap(), std::fs::read(d.join("p.pgm")).unwrap());

    let m: serde_json::Value =
        serde_json::from_str(&ok(d, &["metrics", "--reference", "f.pgm", "--test", "c.pgm"])).unwrap();
    assert!(m["npcr"].as_f64().unwrap() > 15.0);
    assert!(m["psnr"].is_number());

    ok(d, &["attack", "--in", "c.pgm", "--out", "a.pgm", "--attack", "shear:0.02", "--seed", "3", "--header", "c.pgm.json"]);
    ok(d, &["decrypt", "--in", "a.pgm", "--header", "c.pgm.json", "--out", "q.pgm"]);
    let m: serde_json::Value =
        serde_json::from_str(&ok(d, &["metrics", "--reference", "f.pgm", "--test", "q.pgm"])).unwrap();
    let psnr = m["psnr"].as_f64().unwrap();
    assert!(psnr > 20.0 && psnr.is_finite(), "{psnr}");
}

#[test]
fn chaos_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok(dir.path(), &["chaos", "lyapunov", "--a-min", "0.4", "--a-max", "0.5", "--steps", "2", "--n", "20000"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("a,value"));
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 0.5);
    assert!(last[1] > 0.0);
    let csv = ok(dir.path(), &["chaos", "bifurcation", "--steps", "3", "--keep", "4"]);
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 2));
}

#[test]
fn simulate_writes_provenance_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--horizon", "2", "--seed", "4", "--out", "t.csv"]);
    let text = std::fs::read_to_string(d.join("t.csv")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with('#') && first.contains("seed=4"), "{first}");
    let again = ok(d, &["simulate", "--horizon", "2", "--seed", "4"]);
    assert_eq!(text, again);
}

#[test]
fn spec_validate_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("spec.json"),
        r#"{"name": "smoke", "seed": 7, "simulation": {"mode": "ideal_state", "horizon": 0.5}}"#,
    )
    .unwrap();
    let line = ok(d, &["validate", "--spec", "spec.json"]);
    assert!(line.starts_with("ok smoke spec="), "{line}");
    let report: serde_json::Value = serde_json::from_str(&ok(d, &["run", "--spec", "spec.json", "--out-dir", "out"])).unwrap();
    assert!(report.is_object());
    assert!(d.join("out/trajectory.csv").exists());

    std::fs::write(d.join("typo.json"), r#"{"name": "x", "seeed": 1}"#).unwrap();
    assert_eq!(code(&servolab(d, &["validate", "--spec", "typo.json"])), 2);
}

#[test]
fn reproduce_metrics_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok(dir.path(), &["reproduce", "metrics_table", "--seed", "1"]);
    assert!(csv.starts_with("# table=metrics_table"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 10);
    assert_eq!(code(&servolab(dir.path(), &["reproduce", "no_such_table"])), 1);
}
