//! The `snls` binary: exit codes, manifests and stdout.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn snls(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snls"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Every file in the run directory is the manifest or listed in it.
fn assert_no_orphans(dir: &Path) {
    let manifest = read_json(&dir.join("manifest.json"));
    let listed: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for entry in fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(name == "manifest.json" || listed.contains(&name.as_str()), "orphan {name}");
    }
    for name in listed {
        assert!(dir.join(name).is_file(), "missing {name}");
    }
}

#[test]
fn resonant_ladder_is_reported_not_failed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = snls(tmp.path(), &["nonres", "--ladder", "1,2,3"]);
    assert_eq!(out.status.code(), Some(0));
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed["holds"], false);
    assert_eq!(printed["witness"]["indices"], serde_json::json!([0, 1]));
    assert_no_orphans(tmp.path());
}

#[test]
fn spectrum_json_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let out = snls(tmp.path(), &["spectrum", "--eps", "0.01"]);
    assert_eq!(out.status.code(), Some(0));
    let s = read_json(&tmp.path().join("spectrum.json"));
    for key in ["I", "theta", "lambda", "rates", "silnikov", "nonresonance"] {
        assert!(!s[key].is_null(), "{key}");
    }
    assert_eq!(s["lambda"].as_array().unwrap().len(), 17);
    assert_eq!(s["silnikov"]["c1"], "pass");
    assert_eq!(s["nonresonance"]["holds"], true);
    assert_no_orphans(tmp.path());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let usage = snls(&tmp.path().join("a"), &["spectrum", "--n-max", "many"]);
    assert_eq!(usage.status.code(), Some(2));

    let invalid = tmp.path().join("b");
    assert_eq!(snls(&invalid, &["saddle", "--alpha", "3"]).status.code(), Some(2));
    assert_eq!(read_json(&invalid.join("error.json"))["kind"], "invalid_params");
    assert_no_orphans(&invalid);

    let numerical = tmp.path().join("c");
    assert_eq!(snls(&numerical, &["horseshoe", "run", "--budget", "20"]).status.code(), Some(3));
    let e = read_json(&numerical.join("error.json"));
    assert_eq!(e["kind"], "inconclusive");
    assert_eq!(read_json(&numerical.join("manifest.json"))["status"], "failed");
    assert_no_orphans(&numerical);
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("env-run");
    let out = Command::new(env!("CARGO_BIN_EXE_snls"))
        .env("SNLS_OUT_DIR", &dir)
        .args(["global-map", "check"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let g = read_json(&dir.join("genericity.json"));
    assert_eq!(g["report"]["A2"], true);
    assert_no_orphans(&dir);
}

#[test]
fn pipeline_artifacts_are_listed() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 5] = [
        &["evolve", "--tend", "0.02", "--modes", "16", "--every", "5"],
        &["local-map", "--samples", "5", "--point", "1.2,0,0.3,0.01,0,0,0,0"],
        &["global-map", "estimate"],
        &["fixed-points", "--l-max", "4"],
        &["horseshoe", "run", "--period", "2", "--words", "3"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let dir = tmp.path().join(i.to_string());
        let out = snls(&dir, args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert_no_orphans(&dir);
    }
    let orbits = fs::read_to_string(tmp.path().join("4").join("orbits.csv")).unwrap();
    assert_eq!(orbits.lines().count(), 1 + 4 + 16);
    let lm = fs::read_to_string(tmp.path().join("1").join("local_map.csv")).unwrap();
    assert_eq!(lm.lines().count(), 1 + 6);
}
