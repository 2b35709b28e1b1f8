use std::path::Path;
use std::process::{Command, Output};

fn footlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_footlab"))
        .current_dir(dir)
        .env_remove("FOOTLAB_DATA_DIR")
        .args(args)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "{}", stderr(&out));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn detect_without_rules_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = footlab(dir.path(), &["detect"]);
    assert!(!out.status.success());
    assert_eq!(stderr(&out), "error: rules: path not found\n");
}

#[test]
fn config_errors_are_listed_together() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "top_k = 0\n[thresholds]\nmin_confidence = 2.0\n").unwrap();
    let out = footlab(dir.path(), &["--config", "bad.toml", "mine"]);
    assert!(!out.status.success());
    assert_eq!(stderr(&out), "error: top_k: out of range; thresholds.min_confidence: out of range\n");

    std::fs::write(dir.path().join("typo.toml"), "top_kk = 3\n").unwrap();
    let err = stderr(&footlab(dir.path(), &["--config", "typo.toml", "mine"]));
    assert!(err.starts_with("error: config: unknown field `top_kk`"), "{err}");
    assert_eq!(err.lines().count(), 1);

    let err = stderr(&footlab(dir.path(), &["--config", "missing.toml", "mine"]));
    assert_eq!(err, "error: config: path not found\n");
}

#[test]
fn demo_pipeline_runs_and_mining_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(footlab(root, &["--out", "demo", "--seed", "5", "synth"]));
    let demo = root.join("demo");
    let run = |args: &[&str]| {
        let mut full = vec!["--config", "footlab.toml"];
        full.extend_from_slice(args);
        ok(footlab(&demo, &full))
    };
    assert!(run(&["ingest"]).contains("120 windows"));
    run(&["har-train"]);
    assert!(demo.join("model.flf").exists());
    run(&["har-predict"]);
    run(&["mine"]);
    let first = std::fs::read(demo.join("rules.txt")).unwrap();
    run(&["mine"]);
    assert_eq!(std::fs::read(demo.join("rules.txt")).unwrap(), first);
    assert!(String::from_utf8_lossy(&first).contains("\nPass|Kicking|"));

    let detected = run(&["detect"]);
    assert!(detected.starts_with("warnings: "), "{detected}");
    let warnings = footlab_core::detect::read_warnings(&std::fs::read(demo.join("warnings.json")).unwrap()).unwrap();
    assert!(!warnings.is_empty());

    let exported = run(&["export"]);
    assert_eq!(exported.lines().count(), 9);
    assert!(demo.join("export/episodes.csv").exists());

    let report = run(&["evaluate"]);
    assert!(report.starts_with("precision="), "{report}");
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(demo.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["fold_count"], 3);
}

#[test]
fn data_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("elsewhere");
    let out = Command::new(env!("CARGO_BIN_EXE_footlab"))
        .current_dir(dir.path())
        .env("FOOTLAB_DATA_DIR", &store)
        .args(["export"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(store.join("footlab.db").exists());
}
