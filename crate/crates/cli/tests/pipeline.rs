#[path = "../../study/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;

fn synsel(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_synsel")).args(args).env("RUST_LOG", "warn").output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(out.status.success(), "synsel {args:?} failed:\n{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    stdout
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synthetic_pipeline_through_bank() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let pool = root.join("pool");
    synsel(&["synth", "--per-word", "80", "--train", "50", "--seed", "3", "--out", p(&pool)]);
    assert!(pool.join("pairs.tsv").exists());

    let inst = root.join("entail.jsonl");
    let out = synsel(&["build-instances", "--pool", p(&pool), "--mode", "entail", "--ratio", "2:1", "--total", "300", "--seed", "1", "--out", p(&inst)]);
    assert!(out.contains("wrote 300 entailment instances"), "{out}");

    let light = root.join("light");
    let out = synsel(&["train", "--instances", p(&inst), "--mode", "entail", "--backend", "light", "--seed", "2", "--out", p(&light)]);
    assert!(out.contains("trained entailment agent on 300 instances"), "{out}");
    let out = synsel(&["eval-fitb", "--model", p(&light), "--pool", p(&pool), "--k", "10", "--sets", "3", "--seed", "4", "--out", p(&root.join("rows.jsonl"))]);
    assert!(out.contains("mean accuracy"), "{out}");
    assert_eq!(std::fs::read_to_string(root.join("rows.jsonl")).unwrap().lines().count(), 3);

    let mut oracles = Vec::new();
    for (mode, name) in [("entail", "entailment"), ("context", "context")] {
        let inst = root.join(format!("{mode}.small.jsonl"));
        synsel(&["build-instances", "--pool", p(&pool), "--mode", mode, "--no-perturb", "--total", "20", "--out", p(&inst)]);
        let model = root.join(format!("oracle-{mode}"));
        synsel(&["train", "--instances", p(&inst), "--mode", mode, "--backend", "oracle", "--out", p(&model)]);
        let sel = root.join(format!("sel-{name}"));
        let out = synsel(&["select", "--model", p(&model), "--pool", p(&pool), "--per-word", "4", "--k", "10", "--seed", "5", "--baseline", "gmm", "--out", p(&sel)]);
        assert!(out.contains("best accuracy 1.0000"), "{out}");
        assert!(sel.join("gmm_baseline.json").exists());
        oracles.push((model, sel));
    }

    let out = synsel(&["behavior-check", "--model", p(&oracles[0].0), p(&oracles[1].0), "--pool", p(&pool), "--sets", "5", "--k", "10", "--seed", "6"]);
    assert!(out.contains("delta 1.0000"), "{out}");
    assert!(out.contains("zero variance"), "{out}");

    let bank = root.join("bank");
    synsel(&["bank", "--pool", p(&pool), "--entailment", p(&oracles[0].1), "--context", p(&oracles[1].1), "--out", p(&bank)]);
    let entries = std::fs::read_to_string(bank.join("examples.jsonl")).unwrap();
    assert_eq!(entries.lines().count(), 6);
}

#[test]
fn report_over_fixture_sessions() {
    let fx = common::cohort();
    let dir = tempfile::tempdir().unwrap();
    let sessions = dir.path().join("sessions");
    for (id, events) in &fx.logs {
        synsel_study::store::write_log(&sessions, id, events).unwrap();
    }
    fx.catalog.save(dir.path()).unwrap();
    let out = synsel(&["report", "--sessions", p(&sessions), "--catalog", p(dir.path())]);
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["above"]["participants"].as_array().unwrap().len(), 12);
    assert_eq!(report["improved"]["entailment"], 16);
}
