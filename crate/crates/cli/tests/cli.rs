use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn heis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heis-ilg")).args(args).env_remove("HEIS_ILG_TOL").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut args = vec!["generate", "--out", s(&out)];
    args.extend_from_slice(extra);
    let o = heis(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn generate_is_byte_identical_for_equal_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.json", &["--kind", "ilg-k1", "--seed", "7", "--step", "0.01"]);
    let b = generate(dir.path(), "b.json", &["--kind", "ilg-k1", "--seed", "7", "--step", "0.01"]);
    let c = generate(dir.path(), "c.json", &["--kind", "ilg-k1", "--seed", "8", "--step", "0.01"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    let t1 = generate(dir.path(), "t1.json", &["--kind", "tame-kn", "--seed", "3", "--n", "2"]);
    let t2 = generate(dir.path(), "t2.json", &["--kind", "tame-kn", "--seed", "3", "--n", "2"]);
    assert_eq!(std::fs::read(&t1).unwrap(), std::fs::read(&t2).unwrap());
    assert_eq!(read(&t1)["convention"], "tame");
}

#[test]
fn verify_passes_then_fails_after_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let map = generate(dir.path(), "m.json", &["--kind", "ilg-k1", "--seed", "2", "--step", "0.02"]);
    let report = dir.path().join("r.json");
    let o = heis(&["verify", "--input", s(&map), "--out", s(&report)]);
    assert_eq!(code(&o), 0);
    let r = read(&report);
    assert_eq!(r["pass"], true);
    let l = r["intrinsic_constant"].as_f64().unwrap();

    let constants = dir.path().join("c.json");
    std::fs::write(&constants, format!("{{\"intrinsic\": {l}}}")).unwrap();
    let mut m = read(&map);
    let v = m["values"][10][3].as_f64().unwrap();
    m["values"][10][3] = (v + 0.5).into();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, m.to_string()).unwrap();
    let o = heis(&["verify", "--input", s(&bad), "--constants", s(&constants), "--out", s(&report)]);
    assert_eq!(code(&o), 1);
    let r = read(&report);
    assert_eq!(r["pass"], false);
    let pair = r["intrinsic_witness"].as_array().unwrap();
    assert!(pair.iter().any(|i| i.as_u64() == Some(10)), "{pair:?}");
}

#[test]
fn extend_restriction_is_tight() {
    let dir = tempfile::tempdir().unwrap();
    let map = generate(dir.path(), "m.json", &["--kind", "tame-kn", "--seed", "5", "--n", "2", "--points", "15"]);
    let out = dir.path().join("e.json");
    let o = heis(&["extend", "--input", s(&map), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = read(&out);
    assert!(r["restriction_max_error"].as_f64().unwrap() <= 1e-10);
    assert!(r["l_measured"].as_f64().unwrap() <= r["l_formula"].as_f64().unwrap() * (1.0 + 1e-9));
}

#[test]
fn corona_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let map = generate(dir.path(), "m.json", &["--kind", "ilg-k1", "--seed", "1"]);
    let out = dir.path().join("c.json");
    let o = heis(&["corona", "--input", s(&map), "--eta", "0.3", "--depth", "6", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let c = read(&out);
    assert_eq!(c["verification"]["pass"], true);
    assert!(!c["trees"].as_array().unwrap().is_empty());

    let csv = dir.path().join("c.csv");
    assert_eq!(code(&heis(&["report", "--input", s(&out), "--csv", s(&csv)])), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("tree,j,m,s,ratio,quadratic_ratio\n"));
    assert!(text.lines().count() > 1);
}

#[test]
fn corona_rejects_the_first_heisenberg_group() {
    let dir = tempfile::tempdir().unwrap();
    let map = generate(dir.path(), "m.json", &["--kind", "ilg-k1", "--n", "1", "--step", "0.01"]);
    let o = heis(&["corona", "--input", s(&map), "--out", s(&dir.path().join("c.json"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("H^1"));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&heis(&["verify", "--input", s(&missing)])), 2);
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{not json").unwrap();
    assert_eq!(code(&heis(&["verify", "--input", s(&junk)])), 2);
    let wrong = dir.path().join("wrong.json");
    std::fs::write(&wrong, r#"{"k":1,"n":2,"convention":"intrinsic","domain":[[0.0],[1.0]],"values":[[0.0],[1.0]]}"#)
        .unwrap();
    assert_eq!(code(&heis(&["verify", "--input", s(&wrong)])), 2);
}

#[test]
fn loosened_tolerance_is_read_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let map = generate(dir.path(), "m.json", &["--kind", "ilg-k1", "--seed", "4", "--step", "0.05"]);
    let o = Command::new(env!("CARGO_BIN_EXE_heis-ilg"))
        .args(["verify", "--input", s(&map)])
        .env("HEIS_ILG_TOL", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_heis-ilg"))
        .args(["verify", "--input", s(&map)])
        .env("HEIS_ILG_TOL", "10")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}
