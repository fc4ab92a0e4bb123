use std::fs;

use lyapunov_core::experiments::{self, ExperimentConfig, Relation, Scenario};
use serde_json::json;

fn thinning_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new("det", Scenario::ThinningCheck);
    cfg.seed = seed;
    cfg.params = json!({"pairs": [[0.5, 1.0]], "samples": 2000});
    cfg
}

fn written(cfg: &ExperimentConfig) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let out = experiments::run(cfg).unwrap();
    let mut files: Vec<_> = experiments::write_outputs(&out, dir.path())
        .unwrap()
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let a = written(&thinning_config(5));
    let b = written(&thinning_config(5));
    assert!(a.iter().any(|(n, _)| n == "checks.csv"));
    assert!(a.iter().any(|(n, _)| n == "verdict.json"));
    assert_eq!(a, b);
}

#[test]
fn the_seed_changes_the_tables() {
    let a = written(&thinning_config(5));
    let b = written(&thinning_config(6));
    let table = |f: &[(String, Vec<u8>)]| f.iter().find(|(n, _)| n == "thinning.csv").unwrap().1.clone();
    assert_ne!(table(&a), table(&b));
}

#[test]
fn const_check_passes_and_reports_sqrt_two_c() {
    let cfg = ExperimentConfig::from_json(
        r#"{"name": "c", "scenario": "const-check", "potentials": [{"kind": "constant", "c": 2.0}], "seed": 3}"#,
    )
    .unwrap();
    let out = experiments::run(&cfg).unwrap();
    assert!(out.verdict.passed());
    let c = out.verdict.find("varform.constant").next().unwrap();
    assert_eq!(c.relation, Relation::Within);
    assert!((c.measured - 2.0).abs() <= 1e-3 * 2.0);
    assert_eq!(c.target, 2.0);
}

#[test]
fn zero_offset_sandwich_rises_toward_the_mean_bound() {
    let cfg = ExperimentConfig::from_json(
        r#"{"name": "s", "scenario": "scaling-rate",
            "potentials": [{"kind": "trig", "a0": 2.0, "cos": [1.0], "sin": [0.0]}]}"#,
    )
    .unwrap();
    let v = &cfg.potentials().unwrap()[0];
    let rows = experiments::scaling_sandwich(v, 0.0, &[1.0, 10.0, 100.0], 1.0, &cfg.solver).unwrap();
    // n = 1 with c = 0 is Γ_V² itself
    assert!((rows[0].middle - rows[0].lower).abs() < 1e-9 * rows[0].lower);
    for w in rows.windows(2) {
        assert!(w[0].middle < w[1].middle);
    }
    for r in &rows {
        assert!(r.lower <= r.middle * (1.0 + 1e-9) && r.middle <= r.upper * (1.0 + 1e-9));
    }
    assert!((rows[2].middle - rows[2].upper).abs() < 0.01 * rows[2].upper);
}

#[test]
fn verdict_json_round_trips() {
    let out = experiments::run(&thinning_config(9)).unwrap();
    let text = serde_json::to_string(&out.verdict).unwrap();
    let back: experiments::Verdict = serde_json::from_str(&text).unwrap();
    assert_eq!(back, out.verdict);
}
