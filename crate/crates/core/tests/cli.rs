//! Exit codes and output of the command-line binary.

use std::process::{Command, Output};

fn lhip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lhip"))
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(lhip(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lhip(&["parse", "--threshold", "2", "x"]).status.code(), Some(1));
    assert_eq!(lhip(&["--help"]).status.code(), Some(0));
}

#[test]
fn unreadable_input_exits_2() {
    assert_eq!(lhip(&["eval", "no/such/corpus"]).status.code(), Some(2));
    assert_eq!(lhip(&["parse", "--grammar", "data/thesaurus.txt", "x"]).status.code(), Some(2));
    assert_eq!(lhip(&["groups", "data/thesaurus.txt"]).status.code(), Some(2));
}

#[test]
fn exhausted_budget_exits_3() {
    let out = lhip(&["extract", "--step-budget", "10", "--text", "le numéro de madame Plant à Delemont"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["records"][0]["stats"]["budget_exhausted"], true);
}

#[test]
fn parse_lists_analyses() {
    let out = lhip(&["parse", "--grammar", "data/john_saw.lhip", "--start", "s/1", "--threshold", "1", "john saw mary"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["tokens"].as_array().unwrap().len(), 3);
    assert!(!v["analyses"].as_array().unwrap().is_empty());
}

#[test]
fn groups_of_fixture() {
    let out = lhip(&["groups", "data/fixtures/ici_madame_plant.paths"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["lca"], "['P'(2,1,11)]");
    assert!(v["groups"].as_array().unwrap().iter().any(|g| g["words"] == serde_json::json!(["madame", "Plant"])));
}

#[test]
fn complete_fills_defaults() {
    let dir = std::env::temp_dir().join(format!("lhip-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let frame = dir.join("frame.json");
    std::fs::write(&frame, r#"{"target_identification":{"person":{"family_name":"PLANT"}},"target_address":{"locality":{"city":"DELEMONT"}}}"#).unwrap();
    let out = lhip(&["complete", frame.to_str().unwrap()]);
    std::fs::remove_dir_all(&dir).ok();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["frame"]["request"]["phone_type"], "standard");
    assert_eq!(v["frame"]["request"]["request_status"], "ok");
    assert_eq!(v["class"]["class"], "correct");
}

#[test]
fn eval_and_feedback_text() {
    let out = lhip(&["--format", "text", "eval", "data/corpus/mottaz.txt"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("town"));
    let out = lhip(&["feedback", "data/corpus"]);
    assert!(out.status.success());
    assert!(json(&out)["coverage"].as_f64().unwrap() > 0.0);
}
