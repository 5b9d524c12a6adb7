use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .display()
        .to_string()
}

fn coverwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coverwalk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn scp_check_on_triangle_trees() {
    let out = coverwalk(&["scp", "check", "--measure", &data("triangle.json"), "--mode", "full"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["holds"], true);
}

#[test]
fn scp_failure_exits_one_with_report() {
    let out = coverwalk(&["scp", "check", "--measure", &data("correlated.json")]);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    assert_eq!(r["holds"], false);
    assert_eq!(r["witness"]["subset"], serde_json::json!([0]));
    assert_eq!(r["witness"]["x"], "1");
    assert_eq!(r["witness"]["y"], "0");
}

#[test]
fn certify_slice_gives_one_sixteenth() {
    let out = coverwalk(&[
        "constants", "certify", "--measure", &data("slice42.json"), "--walk", "mcmc", "--target", "alpha",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["claimed_bound"], "1/16");
    assert_eq!(r["holds"], true);
}

#[test]
fn missing_dimension_is_a_usage_error() {
    let out = coverwalk(&["measure", "build", "--spec", r#"{"kind":"product","p":[0.5]}"#]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"n\""));
}

#[test]
fn unknown_command_and_missing_file_exit_two() {
    assert_eq!(coverwalk(&["frobnicate"]).status.code(), Some(2));
    let out = coverwalk(&["walk", "mcmc", "--measure", "/nonexistent/m.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generator_files_feed_back_in() {
    let out = coverwalk(&["walk", "synthesize", "--measure", &data("triangle.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let path = std::env::temp_dir().join(format!("coverwalk-gen-{}.json", std::process::id()));
    std::fs::write(&path, r["averaged"].to_string()).unwrap();
    let exact = coverwalk(&[
        "constants", "exact", "--measure", &data("triangle.json"), "--walk", path.to_str().unwrap(),
    ]);
    let direct = coverwalk(&["constants", "exact", "--measure", &data("triangle.json"), "--walk", "synthesize"]);
    std::fs::remove_file(&path).ok();
    assert_eq!(exact.status.code(), Some(0));
    assert_eq!(json(&exact)["value"], json(&direct)["value"]);
}

#[test]
fn output_is_deterministic() {
    let args = ["constants", "estimate", "--measure", &data("triangle.json"), "--kind", "lsi", "--seed", "7"];
    let a = coverwalk(&args);
    let b = coverwalk(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn mixing_and_concentration_reports() {
    let out = coverwalk(&["mixing", "time", "--measure", &data("slice42.json"), "--epsilon", "0.25"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["within_bounds"], true);

    let out = coverwalk(&["conc", "herbst", "--measure", &data("slice42.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["points"].as_array().unwrap().len(), 16);

    let out = coverwalk(&["conc", "pp", "--measure", &data("slice42.json"), "--observable", "[0,1,2,1,2,3]"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["constants"]["k"], 2);
}

#[test]
fn two_state_and_bound_commands() {
    let out = coverwalk(&["constants", "two-state", "--a", "1/8", "--b", "1/4"]);
    assert_eq!(json(&out)["lambda"], "3/8");
    let out = coverwalk(&["mixing", "bound", "--kind", "pi", "--constant", "0.5", "--pi", "0.25", "--epsilon", "0.25"]);
    let v = json(&out)["value"].as_f64().unwrap();
    assert!((v - 2.0 * 4f64.ln()).abs() < 1e-12);
}

#[test]
fn conditioning_and_splitting() {
    let out = coverwalk(&["measure", "condition", "--measure", &data("slice42.json"), "--fix", "0=1,3=0"]);
    let r = json(&out);
    assert_eq!(r["coordinates"], serde_json::json!([1, 2]));
    assert_eq!(r["support"], serde_json::json!(["01", "10"]));
    let out = coverwalk(&["measure", "split", "--measure", &data("triangle.json"), "--coordinate", "0"]);
    assert_eq!(json(&out)["masses"], serde_json::json!(["1/3", "2/3"]));
}

#[test]
fn suite_run_passes() {
    let out = coverwalk(&["suite", "run"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = json(&out);
    assert_eq!(r["criteria"].as_array().unwrap().len(), 10);
    assert_eq!(r["all_pass"], true);
}
