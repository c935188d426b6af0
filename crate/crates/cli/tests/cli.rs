//! End-to-end checks of the command-line interface: the bundled model corpus
//! reproduces its expected verdicts, JSON output carries the documented
//! fields, exit codes reflect expectations, and the stepper replays scripts
//! deterministically.

use std::path::{Path, PathBuf};
use std::process::Command;

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn apicalc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_apicalc"))
}

fn run_case(file: &str, args: &[String]) -> (String, String, i32) {
    let mut cmd = apicalc();
    let mut full: Vec<String> = vec![args[0].clone()];
    full.push(models_dir().join(file).to_string_lossy().into_owned());
    full.extend(args[1..].iter().cloned());
    cmd.args(&full).arg("--json");
    let out = cmd.output().expect("run apicalc");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.code().unwrap_or(-1),
    )
}

#[test]
fn corpus_manifest_verdicts_reproduce() {
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(models_dir().join("manifest.json")).unwrap(),
    )
    .unwrap();
    let mut failures = Vec::new();
    for case in manifest["cases"].as_array().unwrap() {
        let name = case["name"].as_str().unwrap();
        let file = case["file"].as_str().unwrap();
        let args: Vec<String> = case["args"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| a.as_str().unwrap().to_string())
            .collect();
        let expect = case["expect"].as_str().unwrap();
        let (stdout, stderr, code) = run_case(file, &args);
        if code == 2 {
            failures.push(format!("{name}: errored: {stderr}"));
            continue;
        }
        let verdict: serde_json::Value = match serde_json::from_str(stdout.trim()) {
            Ok(v) => v,
            Err(e) => {
                failures.push(format!("{name}: bad json ({e}): {stdout}"));
                continue;
            }
        };
        let got = verdict["verdict"].as_str().unwrap_or("");
        if got != expect {
            failures.push(format!("{name}: expected {expect}, got {got}"));
        }
        println!("corpus {name}: {got}");
    }
    assert!(failures.is_empty(), "corpus mismatches:\n{}", failures.join("\n"));
}

#[test]
fn json_schema_fields() {
    let (stdout, _, code) = run_case(
        "frames.api",
        &["stateq".into(), "phi1".into(), "phi2".into()],
    );
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    for field in ["query", "verdict", "witness", "bounds", "millis"] {
        assert!(v.get(field).is_some(), "missing field {field} in {v}");
    }
    assert_eq!(v["verdict"], "distinguished");
    let witness = v["witness"].as_str().unwrap();
    assert!(witness.contains("=="), "witness is a test: {witness}");
}

#[test]
fn exit_codes_follow_expectations() {
    // matching expectation: 0
    let status = apicalc()
        .args([
            "stateq",
            models_dir().join("frames.api").to_str().unwrap(),
            "phi1",
            "phi2",
            "--expect",
            "distinguished",
        ])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));

    // mismatched expectation: 1
    let status = apicalc()
        .args([
            "stateq",
            models_dir().join("frames.api").to_str().unwrap(),
            "phi1",
            "phi2",
            "--expect",
            "equivalent",
        ])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));

    // usage / file errors: 2
    let status = apicalc().args(["check", "no-such-file.api"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn check_reports_model_shape() {
    let out = apicalc()
        .args(["check", models_dir().join("mac_weak.api").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("8 rules"), "{text}");
}

#[test]
fn normalize_expression() {
    let out = apicalc()
        .args([
            "normalize",
            models_dir().join("mac_weak.api").to_str().unwrap(),
            "-e",
            "h(m, n :: n :: n :: nil)",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.trim(), "f(f(f(m, n), n), n)");
}

#[test]
fn step_script_replays_deterministically() {
    let script = models_dir().join("../target/step_script.txt");
    std::fs::write(&script, "0\n0\nundo\n0\nquit\n").unwrap();
    let run = || {
        let out = apicalc()
            .args([
                "step",
                models_dir().join("fig4.api").to_str().unwrap(),
                "Oops",
                "--script",
                script.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        String::from_utf8_lossy(&out.stdout).into_owned()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second, "script replay must be deterministic");
    assert!(first.contains("frame:"), "{first}");
}

#[test]
fn step_budget_env_guard() {
    // a tiny budget trips the step limit on a deep normalization
    let out = apicalc()
        .env("APICALC_STEP_BUDGET", "1")
        .args([
            "normalize",
            models_dir().join("mac_weak.api").to_str().unwrap(),
            "-e",
            "h(m, n :: n :: n :: nil)",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("budget"), "{err}");
}
