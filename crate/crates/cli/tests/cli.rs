//! Runs the `odenorm` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn odenorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odenorm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = odenorm(args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

/// Parses stdout as exactly one JSON document and validates it.
fn json_checked(schema: &str, args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.push("--json");
    let text = ok(&all);
    let doc: Value = serde_json::from_str(&text).expect("stdout is one JSON document");
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(schema);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    if let Err(errors) = compiled.validate(&doc) {
        let msgs: Vec<String> = errors
            .map(|e| format!("{e} at {}", e.instance_path))
            .collect();
        panic!("{schema} rejected output: {msgs:?}\n{text}");
    }
    doc
}

const FAMILY1: &str = "u^2*(x^2+u^2)*(1+y)";
const FAMILY2: &str = "u^2*(x^2+u^2)*(1+2*y)";

#[test]
fn flat_invariants() {
    let out = ok(&["invariants", "--ode", "0"]);
    assert!(out.contains("I1 = 0\nI2 = 0\n"));
    assert!(out.contains("class = flat"));
}

#[test]
fn linearizable_normal_form_vanishes() {
    let out = ok(&["normal-form", "--ode", "x*y*u^3", "--weight", "10"]);
    assert!(out.starts_with("N = 0\n"), "{out}");
    let doc = json_checked(
        "normal-form.json",
        &["normal-form", "--ode", "x*y*u^3", "--weight", "10"],
    );
    assert_eq!(doc["ode_terms"].as_array().unwrap().len(), 0);
}

#[test]
fn family_members_are_inequivalent() {
    let args = [
        "equivalent",
        "--ode1",
        FAMILY1,
        "--ode2",
        FAMILY2,
        "--weight",
        "9",
        "--precision",
        "40",
    ];
    let out = ok(&args);
    assert!(out.starts_with("INEQUIVALENT\n"), "{out}");
    assert!(out.contains("witness = special normal form coefficient"));
    let doc = json_checked("equivalent.json", &args);
    assert_eq!(doc["kind"], "INEQUIVALENT");
    assert!(doc["witness"]["exp"].is_array());
}

#[test]
fn classify_strongly_nonflat() {
    let doc = json_checked("classify.json", &["classify", "--ode", FAMILY1]);
    assert_eq!(doc["class"], "strongly-nonflat");
    assert_eq!(
        (doc["i1_at"].as_str(), doc["i2_at"].as_str()),
        (Some("24"), Some("4"))
    );
}

#[test]
fn every_json_output_matches_its_schema() {
    let inv = json_checked("invariants.json", &["invariants", "--ode", "x^2*u^2"]);
    assert_eq!(inv["class"], "semi-flat");
    let sol = json_checked(
        "solutions.json",
        &["solutions", "--ode", "u^4", "--weight", "7"],
    );
    assert_eq!(sol["phi"]["vars"], serde_json::json!(["x", "a", "b"]));
    json_checked(
        "special-normal-form.json",
        &["special-normal-form", "--ode", FAMILY1, "--precision", "30"],
    );
    let tr = json_checked(
        "transform.json",
        &[
            "transform",
            "--ode",
            "u^3",
            "--map",
            "x + y ; y",
            "--weight",
            "6",
        ],
    );
    assert_eq!(tr["ode"]["vars"], serde_json::json!(["x", "y", "u"]));
    let ch = json_checked("chain.json", &["chain", "--ode", "0", "--steps", "5"]);
    assert_eq!(ch["points"].as_array().unwrap().len(), 6);
}

#[test]
fn recentering_with_at() {
    // y'' = u^4 at (1, 2, 1/2): I1 is the constant 24.
    let out = ok(&[
        "invariants",
        "--ode",
        "u^4",
        "--at",
        "1,2,1/2",
        "--weight",
        "6",
    ]);
    assert!(out.starts_with("I1 = 24\n"), "{out}");
}

#[test]
fn chain_csv() {
    let out = ok(&["chain", "--ode", "0", "--steps", "2"]);
    assert_eq!(out, "b,x,y,u\n0,0,0,0\n0.01,0,0.01,0\n0.02,0,0.02,0\n");
}

#[test]
fn output_is_deterministic() {
    let args = [
        "special-normal-form",
        "--ode",
        FAMILY1,
        "--weight",
        "9",
        "--json",
    ];
    assert_eq!(ok(&args), ok(&args));
    let args = ["normal-form", "--ode", "x^2*u^3 + y*u^4", "--weight", "8"];
    assert_eq!(ok(&args), ok(&args));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["invariants", "--ode", "x +"],
        vec!["invariants", "--ode", "z"],
        vec!["invariants", "--ode", "0.5*x"],
        vec!["invariants", "--ode", "0", "--at", "1,2"],
        vec!["normal-form", "--ode", "0", "--weight", "3"],
        vec!["normal-form", "--ode", "0", "--params", "0,1,0,0,0"],
        vec!["special-normal-form", "--ode", FAMILY1, "--precision", "8"],
        vec!["transform", "--ode", "0", "--map", "x y"],
        vec!["chain", "--ode", "0", "--dir", "1"],
        vec!["nonsense"],
        vec!["invariants"],
    ] {
        let o = odenorm(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn math_errors_exit_3() {
    for args in [
        vec!["special-normal-form", "--ode", "u^2"],
        vec!["special-normal-form", "--ode", "x^2*u^2"],
        vec!["transform", "--ode", "0", "--map", "y ; x"],
    ] {
        let o = odenorm(&args);
        assert_eq!(
            o.status.code(),
            Some(3),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(o.stdout.is_empty());
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
    }
}
