use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btcycles"))
        .args(args)
        .env_remove("BTCYCLES_THREADS")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

#[test]
fn ep_routes_agree() {
    let v = json(&["ep", "--p", "3", "--inv", "1,1,+1,-1", "--routes", "all", "--format", "json"]);
    assert_eq!(v["e_p"], 1);
    assert_eq!(v["routes"]["closed"], 1);
    assert_eq!(v["routes"]["bruteforce"], 1);
    assert_eq!(v["routes"]["density"], "1");
    let b = &v["breakdown"];
    assert_eq!(b["hh"].as_i64().unwrap() + b["hv"].as_i64().unwrap() + b["vh"].as_i64().unwrap() + b["vv"].as_i64().unwrap(), 1);
}

#[test]
fn ep_ordinary_example_has_chart_route() {
    let v = json(&["ep", "--p", "5", "--inv", "0,4,-1,+1", "--routes", "all", "--format", "json"]);
    assert_eq!(v["e_p"], 4);
    assert_eq!(v["routes"]["chart"], 4);
}

#[test]
fn ep_accepts_a_matrix() {
    let v = json(&["ep", "--p", "3", "--T", "3,0,6", "--format", "json"]);
    assert_eq!(v["e_p"], 1);
    assert_eq!(v["invariants"]["alpha"], 1);
}

#[test]
fn density_output_round_trips() {
    let v = json(&["density", "--p", "3", "--S", "Sprime", "--T", "1,0,3", "--format", "json"]);
    assert_eq!(v["value"], "8");
    let counted = json(&["density", "--p", "3", "--S", "Sprime", "--T", "1,0,3", "--method", "count", "--format", "json"]);
    assert_eq!(counted["value"], v["value"]);
}

#[test]
fn gk_reports_relation() {
    let out = run(&["gk", "--p", "3", "--inv", "1,2,+1,+1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("kitaoka_relation"), "{text}");
}

#[test]
fn tube_emits_dot() {
    let out = run(&["tube", "--p", "3", "--j", "0,18,1", "--radius", "1", "--format", "dot"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("graph tube {"));
}

#[test]
fn verify_passes_small_grid() {
    let out = run(&["verify", "--suite", "triangle", "--p", "3", "--bound", "3", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn exit_codes() {
    // invalid prime
    assert_eq!(run(&["ep", "--p", "4", "--inv", "1,1"]).status.code(), Some(2));
    // obstructed tuple
    assert_eq!(run(&["ep", "--p", "3", "--inv", "1,1,+1,+1"]).status.code(), Some(3));
    // malformed flag
    assert_eq!(run(&["ep", "--p", "3"]).status.code(), Some(2));
    // tiny budget
    let out = run(&["density", "--p", "3", "--S", "S", "--T", "1,0,27", "--method", "count", "--budget", "10"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
