use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_batchcode"))
}

fn run(args: &[&str]) -> (Value, i32) {
    let out = bin().args(args).output().unwrap();
    parse(&out)
}

fn parse(out: &Output) -> (Value, i32) {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("bad JSON {text:?}: {e}"));
    assert_eq!(v["schema"], 1);
    (v, out.status.code().unwrap())
}

fn verify(doc: &Value) -> (Value, i32) {
    let mut child = bin()
        .arg("verify")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(doc.to_string().as_bytes()).unwrap();
    parse(&child.wait_with_output().unwrap())
}

#[test]
fn serve_odd_example_round_trips_through_verify() {
    let (v, code) = run(&["serve-odd", "--k", "3", "--requests", "[[1,1,1],[1,0,0],[0,1,0],[0,0,1]]"]);
    assert_eq!(code, 0);
    assert_eq!(v["verified"], true);
    assert_eq!(v["assignment"].as_array().unwrap().len(), 4);
    let (check, code) = verify(&v);
    assert_eq!(code, 0, "{check}");
    assert_eq!(check["valid"], true);
}

#[test]
fn tampered_assignment_fails_verification() {
    let (mut v, _) = run(&["serve-odd", "--k", "3", "--requests", "[[1,1,1],[1,0,0],[0,1,0],[0,0,1]]"]);
    v["assignment"][0] = serde_json::json!([1]);
    let (check, code) = verify(&v);
    assert_eq!(code, 1);
    assert_eq!(check["valid"], false);
    assert!(!check["violations"].as_array().unwrap().is_empty());
}

#[test]
fn serve_affine_and_functional_round_trip() {
    let (v, code) = run(&["serve-affine", "--k", "3", "--u", "[0,1,1]", "--requests", "[[0,1,0],[1,1,0],[0,0,1],[0,1,0]]"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(verify(&v).1, 0);

    let (v, code) = run(&["serve-functional", "--k", "3", "--requests", "[[0,0,1],[0,1,0],[0,1,1],[1,0,0]]"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["hadamard_shape"], true);
    let (check, code) = verify(&v);
    assert_eq!(code, 0, "{check}");
    assert_eq!(check["hadamard_shape"], true);
}

#[test]
fn check_strong_outside_range_reports_failures() {
    let (v, code) = run(&["check-strong", "--group", "Z2^2", "--m", "2"]);
    assert_eq!(code, 0);
    assert_eq!(v["within_conjecture_range"], false);
    let failures = v["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 6);
    assert!(failures.contains(&serde_json::json!([[0, 1], [1, 0]])));
}

#[test]
fn check_strong_flags_failures_in_a_claimed_size() {
    let (v, code) = run(&["check-strong", "--group", "Z2^3", "--m", "3"]);
    assert_eq!(code, 1);
    assert_eq!(v["claim_proven"], true);
    assert!(v["failures"].as_array().unwrap().contains(&serde_json::json!([[0, 0, 1], [0, 1, 0], [0, 1, 1]])));

    let (v, code) = run(&["check-strong", "--group", "Z7", "--m", "3", "--witnesses"]);
    assert_eq!(code, 0);
    assert_eq!(v["failure_count"], 0);
    assert_eq!(v["witnesses"].as_array().unwrap().len(), 216);
}

#[test]
fn identical_seed_gives_identical_output() {
    let args = ["check-strong", "--group", "Z3^2", "--m", "4", "--random", "200", "--seed", "7"];
    let a = bin().args(args).output().unwrap();
    let b = bin().args(args).output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    let (v, code) = parse(&a);
    assert_eq!(code, 0);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["tested"], 200);

    let c = bin().args(&args[..7]).output().unwrap();
    let d = bin().args(&args[..7]).output().unwrap();
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn coeff_examples() {
    let (v, code) = run(&["coeff", "--m", "3", "--monomial", "6,5,1"]);
    assert_eq!(code, 0);
    assert_eq!(v["coefficient"], 8);
    let (v, _) = run(&["coeff", "--m", "4", "--monomial", "8,8,7,1", "--mod", "5"]);
    assert_eq!(v["coefficient"], -72);
    assert_eq!(v["mod_p"], 3);
    let (v, code) = run(&["coeff", "--m", "2", "--monomial", "1,1"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"], "precondition");
    let (v, code) = run(&["coeff", "--m", "2", "--monomial", "1,1", "--r", "1,-2"]);
    assert_eq!(code, 0, "{v}");
    assert!(v["coefficient"].is_i64());
}

#[test]
fn group_and_full_service_round_trip() {
    let (v, code) = run(&["group-service", "--group", "Z7", "--requests", "[1,2,3]"]);
    assert_eq!(code, 0);
    assert_eq!(verify(&v).1, 0);

    let (v, code) = run(&["group-service", "--group", "Z2^2", "--requests", "[[0,1],[1,0]]", "--special"]);
    assert_eq!(code, 0);
    assert!(v["triples"].is_null());

    let (v, code) = run(&["group-service", "--group", "Z7", "--requests", "[1,1,2]", "--special"]);
    assert_eq!(code, 0);
    assert_eq!(verify(&v).1, 0);

    let (v, code) = run(&["full-service", "--group", "Z2xZ2", "--requests", "[[0,1],[0,1],[1,0],[1,0]]"]);
    assert_eq!(code, 0);
    let (check, code) = verify(&v);
    assert_eq!(code, 0);
    assert_eq!(check["covers_group"], true);

    let (v, code) = run(&["full-service", "--group", "Z3", "--requests", "[1,0,0]"]);
    assert_eq!(code, 0);
    assert!(v["triples"].is_null());
    assert_eq!(v["request_sum"], serde_json::json!([1]));
}

#[test]
fn snevily_and_oracle() {
    let (v, code) = run(&["snevily", "--group", "Z4", "--set", "[0,2]", "--requests", "[0,2]"]);
    assert_eq!(code, 0);
    assert!(v["numbering"].is_null());
    let (v, code) = run(&["snevily", "--group", "Z9", "--set", "[0,1,4]", "--requests", "[3,3,6]"]);
    assert_eq!(code, 0);
    assert_eq!(v["verified"], true);

    let (v, code) = run(&["oracle", "--k", "2", "--requests", "[[0,1],[1,0],[1,1]]"]);
    assert_eq!(code, 0);
    assert!(!v["assignment"].is_null());
    assert_eq!(verify(&v).1, 0);
    let (v, code) = run(&["oracle", "--k", "5", "--requests", "[[0,0,0,0,1]]"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"], "precondition");
}

#[test]
fn requests_from_file_and_out_flag() {
    let dir = std::env::temp_dir().join(format!("batchcode-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let req = dir.join("req.json");
    let out = dir.join("out.json");
    std::fs::write(&req, "[[1,0],[0,1]]").unwrap();
    let status = bin()
        .args(["serve-odd", "--k", "2", "--requests"])
        .arg(format!("@{}", req.display()))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["verified"], true);
    let check = bin().args(["verify", "--input"]).arg(&out).output().unwrap();
    assert_eq!(parse(&check).1, 0);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn usage_and_domain_errors_exit_2() {
    let out = bin().args(["serve-odd", "--k", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let (v, code) = run(&["serve-odd", "--k", "3", "--requests", "[[1,1,0]]"]);
    assert_eq!(code, 2);
    assert!(!v["detail"].as_str().unwrap().is_empty());
    let (v, code) = run(&["group-service", "--group", "Z1", "--requests", "[]"]);
    assert_eq!(code, 2);
    assert!(v.get("error").is_some());
}
