use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lyaplab(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lyaplab"))
        .args(args)
        .env("LYAP_OUTPUT_DIR", out_dir)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const CONST_CHECK: &str = r#"{"name": "cc", "scenario": "const-check",
  "potentials": [{"kind": "constant", "c": 2.0}], "seed": 1}"#;

#[test]
fn empty_and_broken_configs_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("empty.json", ""),
        ("object.json", "{}"),
        ("bad.json", r#"{"name": "x", "scenario": "no-such-scenario"}"#),
        ("extra.json", r#"{"name": "x", "scenario": "const-check", "colour": 1}"#),
        (
            "params.json",
            r#"{"name": "x", "scenario": "const-check", "params": {"tolerance": 1}}"#,
        ),
    ] {
        let path = write(tmp.path(), name, text);
        let out = lyaplab(&["run", &path], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = tmp.path().join("missing.json");
    let out = lyaplab(&["run", missing.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn passing_run_exits_zero_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write(tmp.path(), "cc.json", CONST_CHECK);
    let out = lyaplab(&["run", &path], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[PASS] varform.constant"), "{stdout}");
    for f in ["checks.csv", "const_check.csv", "verdict.json"] {
        assert!(tmp.path().join("cc").join(f).is_file(), "{f}");
    }
}

#[test]
fn failing_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"name": "sr", "scenario": "scaling-rate",
      "potentials": [{"kind": "trig", "a0": 2.0, "cos": [1.0], "sin": [0.0]}],
      "params": {"n_list": [1, 10], "limit_tol": 1e-9}}"#;
    let path = write(tmp.path(), "sr.json", cfg);
    let out = lyaplab(&["run", &path], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL] scaling.limit"));
}

#[test]
fn runs_are_byte_identical_and_seed_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"name": "th", "scenario": "thinning-check", "seed": 4,
      "params": {"pairs": [[0.5, 1.0]], "samples": 3000}}"#;
    let path = write(tmp.path(), "th.json", cfg);
    let read = |dir: &Path| fs::read(dir.join("th").join("thinning.csv")).unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    lyaplab(&["run", &path], &a);
    lyaplab(&["run", &path], &b);
    lyaplab(&["run", &path, "--seed", "5"], &c);
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let verdict = fs::read_to_string(c.join("th").join("verdict.json")).unwrap();
    assert!(verdict.contains("\"seed\": 5"));
}

#[test]
fn lists_every_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lyaplab(&["list-scenarios"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 10);
    assert!(text.lines().any(|l| l.starts_with("untypical-scaling")));
}

#[test]
fn unknown_corpus_and_bad_flags_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(lyaplab(&["props-suite", "--corpus", "other"], tmp.path()).status.code(), Some(2));
    assert_eq!(lyaplab(&["run"], tmp.path()).status.code(), Some(2));
    assert_eq!(lyaplab(&["frobnicate"], tmp.path()).status.code(), Some(2));
}
