use std::path::Path;
use std::process::{Command, Output};

fn segkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segkit"))
        .args(args)
        .output()
        .expect("spawn segkit")
}

fn ok(args: &[&str]) -> String {
    let o = segkit(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_run_on_phantom() {
    let dir = tempfile::tempdir().unwrap();
    let ph = dir.path().join("ph");
    let store = dir.path().join("store");
    let listed = ok(&["phantom", "--out", s(&ph), "--seed", "3"]);
    let files: Vec<&str> = listed.lines().collect();
    assert_eq!(files.len(), 4);
    let config = files[3];

    let mut args = vec!["--config", config, "harmonize", "--out", s(&store)];
    args.extend(&files[..3]);
    assert!(ok(&args).contains("harmonized 12 scans"));
    ok(&["--config", config, "split", "--store", s(&store)]);
    ok(&["--config", config, "sample-plan", "--store", s(&store)]);
    assert!(store.join("sample_plan.json").exists());

    let eval = dir.path().join("eval");
    ok(&["--config", config, "eval", "--store", s(&store), "--out", s(&eval), "--pred-dir", s(&store), "--scope", "all"]);
    let csv = ok(&["report", "--records", s(&eval.join("records.jsonl")), "--store", s(&store), "--out", s(&dir.path().join("rep"))]);
    let dsc_row = csv.lines().find(|l| l.starts_with("DSC,")).unwrap();
    assert!(dsc_row.ends_with(",100.00"), "{dsc_row}");

    let boxes = dir.path().join("boxes");
    ok(&["eval", "--store", s(&store), "--out", s(&boxes), "--boxes", "loose", "--tau-voxels", "1"]);
    assert!(boxes.join("records.jsonl").exists());
}

#[test]
fn missing_store_names_the_upstream_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = segkit(&["split", "--store", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("segkit harmonize --out"));
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"train_ratio": 1.5}"#).unwrap();
    assert_eq!(segkit(&["--config", s(&cfg), "split", "--store", "x"]).status.code(), Some(1));
    std::fs::write(&cfg, r#"{"no_such_field": 1}"#).unwrap();
    assert_eq!(segkit(&["--config", s(&cfg), "split", "--store", "x"]).status.code(), Some(1));
    assert_eq!(segkit(&["eval", "--store", "x", "--out", "y"]).status.code(), Some(1));
    assert_eq!(segkit(&["--help"]).status.code(), Some(0));
}

#[test]
fn partial_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let ph = dir.path().join("ph");
    let listed = ok(&["phantom", "--out", s(&ph), "--scans-per-dataset", "2"]);
    let files: Vec<&str> = listed.lines().collect();
    std::fs::remove_file(ph.join("phantom_b/img/b_001.nii.gz")).unwrap();
    let store = dir.path().join("store");
    let mut args = vec!["--config", files[3], "harmonize", "--out", s(&store)];
    args.extend(&files[..3]);
    let o = segkit(&args);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let failures = std::fs::read_to_string(store.join("failures.json")).unwrap();
    assert!(failures.contains("b_001"));
}
