use std::process::Command;

use serde_json::Value;

fn run(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_sl2kit")).args(args).output().expect("binary runs");
    let code = out.status.code().expect("exit code");
    let json = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (code, json)
}

#[test]
fn verify_borel_symbolic_passes() {
    let (code, v) = run(&["verify-borel", "--form", "borel:I", "--p", "5", "--params", "e1=0", "--mode", "symbolic"]);
    assert_eq!(code, 0);
    assert_eq!(v["passed"], true);
    assert_eq!(v["backend"], "symbolic");
    assert_eq!(v["schema"], 1);
}

#[test]
fn verify_sl2_exhaustive_over_f9() {
    let (code, v) =
        run(&["verify-sl2", "--form", "sharp:XV", "--p", "3", "--params", "e2=1,e3=0", "--m", "2", "--mode", "exhaustive"]);
    assert_eq!(code, 0);
    assert_eq!(v["passed"], true);
    assert_eq!(v["backend"], "exhaustive");
}

#[test]
fn extend_reports_inconsistency_with_certificate() {
    let (code, v) = run(&["extend", "--form", "borel:XII", "--p", "2", "--params", "e1=0,d2=0"]);
    assert_eq!(code, 1);
    assert_eq!(v["status"], "inconsistent");
    assert!(v["certificate"]["equations"].as_array().is_some_and(|e| !e.is_empty()));
}

#[test]
fn extend_unique_reports_phi_minus_and_sigma() {
    let (code, v) = run(&["extend", "--form", "borel:I", "--p", "5", "--params", "e1=0"]);
    assert_eq!(code, 0);
    assert_eq!(v["status"], "unique");
    assert_eq!(v["phi_minus"][1][0], "3*s");
    assert_eq!(v["matches_catalog"], true);
}

#[test]
fn extend_rejects_symbolic_mode() {
    let (code, _) = run(&["extend", "--form", "borel:I", "--p", "5", "--params", "e1=0", "--mode", "symbolic"]);
    assert_eq!(code, 2);
}

#[test]
fn decompose_trivial_form() {
    let (code, v) = run(&["decompose", "--form", "sharp:XXVI", "--p", "3"]);
    assert_eq!(code, 0);
    assert_eq!(v["summands"], serde_json::json!(["small:1", "small:1", "small:1", "small:1"]));
}

#[test]
fn classify_after_conjugation() {
    let (code, v) = run(&["classify", "--form", "sharp:XV", "--p", "3", "--params", "e2=1,e3=0", "--conjugate", "--seed", "9"]);
    assert_eq!(code, 0);
    assert_eq!(v["class"]["form"], "sharp:XV");
    assert_eq!(v["class"]["params"], "e2=1,e3=0");
}

#[test]
fn invariants_of_sharp_ii() {
    let (code, v) = run(&["invariants", "--form", "sharp:II", "--p", "3", "--params", "e1=0"]);
    assert_eq!(code, 0);
    assert_eq!(v["signature"]["weights"], serde_json::json!([3, 1, -1, -3]));
    assert_eq!(v["fixed_dims"], serde_json::json!([0, 0]));
}

#[test]
fn equivalence_verdicts() {
    let (code, v) =
        run(&["equiv", "--form", "star:XXI", "--with", "star:V", "--p", "2", "--params", "e1=0", "--with-params", "e1=0"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["equivalent"], true);
    let (code, v) =
        run(&["equiv", "--form", "sharp:II", "--with", "sharp:VII", "--p", "3", "--params", "e1=0", "--with-params", "e1=0"]);
    assert_eq!(code, 1);
    assert_eq!(v["equivalent"], false);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["verify-borel", "--p", "5"]).0, 2);
    assert_eq!(run(&["verify-borel", "--form", "borel:XXX", "--p", "5"]).0, 2);
    assert_eq!(run(&["verify-borel", "--form", "borel:I", "--p", "4"]).0, 2);
    assert_eq!(run(&["suite", "--criteria", "9"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
}

#[test]
fn catalog_listing_and_entry() {
    let (code, v) = run(&["catalog", "--p", "2", "--max-e", "0"]);
    assert_eq!(code, 0);
    assert!(v["families"].as_array().is_some_and(|f| f.len() > 26));
    let (code, v) = run(&["catalog", "--form", "star:XXVI", "--p", "5"]);
    assert_eq!(code, 0);
    assert_eq!(v["entry"]["entries"][0][0], "1");
}

#[test]
fn suite_subset_writes_report() {
    let dir = std::env::temp_dir().join(format!("sl2kit-suite-{}.json", std::process::id()));
    let path = dir.to_str().unwrap();
    let (code, _) = run(&["suite", "--primes", "2", "--max-e", "0", "--criteria", "4,6", "--cases", "5", "--out", path]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&dir).unwrap()).unwrap();
    std::fs::remove_file(&dir).ok();
    assert_eq!(v["passed"], true);
    assert_eq!(v["criteria"].as_array().map(|c| c.len()), Some(2));
}
