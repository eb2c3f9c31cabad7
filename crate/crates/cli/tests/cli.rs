use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pointresolve"))
        .args(args)
        .env_remove("POINTRESOLVE_LEXICON")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a 24-scene mixed dataset (first half train) and a 3d model.
fn dataset(dir: &Path) -> (String, String) {
    let data = dir.join("data");
    let out = run(&[
        "synth",
        "--preset",
        "mixed",
        "--count",
        "24",
        "--seed",
        "3",
        "--out",
        path(&data),
        "--train-fraction",
        "0.5",
        "--jobs",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = data.join("manifest.json");
    let model = dir.join("model.json");
    let out = run(&[
        "train",
        "--manifest",
        path(&manifest),
        "--features",
        "full",
        "--mode",
        "3d",
        "--out",
        path(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    (
        manifest.to_str().unwrap().into(),
        model.to_str().unwrap().into(),
    )
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = run(&["resolve", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&[
        "synth", "--preset", "sideways", "--count", "1", "--out", "x",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("resolve"));
}

#[test]
fn end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, model) = dataset(dir.path());
    let data = dir.path().join("data");

    // mixed cycles easy, hard, neutral, both-arms; scenes 12.. are test
    for (index, pointing) in [(12, true), (13, true), (14, false), (15, true)] {
        let scene_path = data.join(format!("scene_{index:05}.json"));
        let scene: Value =
            serde_json::from_str(&std::fs::read_to_string(&scene_path).unwrap()).unwrap();
        let out = run(&[
            "resolve",
            "--scene",
            path(&scene_path),
            "--model",
            &model,
            "--mode",
            "3d",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let result = stdout_json(&out);
        assert_eq!(
            result["is_pointing"],
            Value::Bool(pointing),
            "scene {index}"
        );
        if pointing {
            assert_eq!(
                result["target_id"], scene["truth"]["target_id"],
                "scene {index}"
            );
        } else {
            assert!(result["target_id"].is_null());
        }
    }

    let report = dir.path().join("report.json");
    let out = run(&[
        "evaluate",
        "--manifest",
        &manifest,
        "--model",
        &model,
        "--mode",
        "3d",
        "--captions",
        "on",
        "--report",
        path(&report),
        "--jobs",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let printed = stdout_json(&out);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(printed, written);
    assert_eq!(printed.as_array().unwrap().len(), 6);
    assert!(String::from_utf8_lossy(&out.stderr).contains("recognition"));
}

#[test]
fn captions_override_mislabels() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = run(&[
        "synth",
        "--preset",
        "easy",
        "--count",
        "6",
        "--seed",
        "8",
        "--out",
        path(&data),
        "--train-fraction",
        "0.5",
        "--mislabel-rate",
        "1",
    ]);
    assert!(out.status.success());
    let model = dir.path().join("model.json");
    let manifest = data.join("manifest.json");
    assert!(run(&[
        "train",
        "--manifest",
        path(&manifest),
        "--features",
        "full",
        "--mode",
        "3d",
        "--out",
        path(&model)
    ])
    .status
    .success());

    let scene_path = data.join("scene_00005.json");
    let out = run(&[
        "resolve",
        "--scene",
        path(&scene_path),
        "--model",
        path(&model),
        "--mode",
        "3d",
        "--captions",
        "on",
    ]);
    let result = stdout_json(&out);
    let rec = &result["reconciliation"];
    assert_eq!(rec["action"], "overridden");
    assert_ne!(rec["original_label"], rec["final_label"]);
    assert_eq!(result["label"], rec["final_label"]);
}

#[test]
fn io_and_validation_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, model) = dataset(dir.path());

    let missing = dir.path().join("nope.json");
    let out = run(&[
        "resolve",
        "--scene",
        path(&missing),
        "--model",
        &model,
        "--mode",
        "3d",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());

    // model trained in 3d used in 2d mode
    let scene = dir.path().join("data/scene_00000.json");
    let out = run(&[
        "resolve",
        "--scene",
        path(&scene),
        "--model",
        &model,
        "--mode",
        "2d",
    ]);
    assert_eq!(out.status.code(), Some(1));

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"[{"path": "data/scene_00000.json", "split": "validation", "difficulty": "easy"}]"#,
    )
    .unwrap();
    let out = run(&[
        "evaluate",
        "--manifest",
        path(&bad),
        "--model",
        &model,
        "--mode",
        "3d",
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&[
        "evaluate",
        "--manifest",
        &manifest,
        "--model",
        &model,
        "--mode",
        "3d",
        "--report",
        "/nonexistent/dir/r.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn lexicon_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (_, model) = dataset(dir.path());
    let scene = dir.path().join("data/scene_00012.json");
    let out = Command::new(env!("CARGO_BIN_EXE_pointresolve"))
        .args([
            "resolve",
            "--scene",
            path(&scene),
            "--model",
            &model,
            "--mode",
            "3d",
            "--captions",
            "on",
        ])
        .env(
            "POINTRESOLVE_LEXICON",
            dir.path().join("missing-lexicon.json"),
        )
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
