use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

const CURVE: &str = r#"{"form":"short","A":"-2","B":"1"}"#;
const SURFACE: &str = r#"{"F4":[1,0,0,0,1],"F6":[1,0,0,0,0,0,1]}"#;

fn schema_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

fn load(name: &str) -> Value {
    let text = std::fs::read_to_string(schema_dir().join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Replaces references to the manifest schema by its body.
fn inline_manifest(v: &mut Value, manifest: &Value) {
    match v {
        Value::Object(map) => {
            if map.get("$ref").and_then(Value::as_str) == Some("manifest.json") {
                *v = manifest.clone();
                return;
            }
            map.values_mut().for_each(|x| inline_manifest(x, manifest));
        }
        Value::Array(items) => items.iter_mut().for_each(|x| inline_manifest(x, manifest)),
        _ => {}
    }
}

fn validator(name: &str) -> jsonschema::Validator {
    let mut manifest = load("manifest");
    let m = manifest.as_object_mut().unwrap();
    m.remove("$schema");
    m.remove("$id");
    let mut schema = load(name);
    inline_manifest(&mut schema, &manifest);
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn run(args: &[&str]) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_intpoints"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn assert_valid(schema: &str, doc: &Value) {
    let v = validator(schema);
    let errors: Vec<String> = v
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{schema}: {errors:#?}");
}

#[test]
fn count_reports_match_schema() {
    for args in [
        vec!["enumerate", "--curve", CURVE, "--box", "[-50,50,-400,400]"],
        vec![
            "enumerate",
            "--curve",
            CURVE,
            "--box",
            "[-50,50,-400,400]",
            "--method",
            "sieve",
        ],
        vec![
            "enumerate",
            "--curve",
            CURVE,
            "--box",
            "[100,300,-5000,5000]",
            "--method",
            "pipeline",
        ],
        vec!["pipeline", "--curve", CURVE, "--N", "20"],
    ] {
        assert_valid("count_report", &run(&args));
    }
}

#[test]
fn analytic_reports_match_schema() {
    assert_valid("tau_association", &run(&["tau", "--j", "-1000"]));
    assert_valid(
        "height_breakdown",
        &run(&["height", "--curve", CURVE, "--x", "0", "--y", "1"]),
    );
    assert_valid(
        "sieve_certificate",
        &run(&["sieve-bound", "--curve", CURVE, "--interval", "[0,1000]"]),
    );
    assert_valid(
        "verification_reports",
        &run(&["verify", "--check", "L5", "--check", "L4", "--coarse"]),
    );
}

#[test]
fn delpezzo_report_matches_schema() {
    assert_valid(
        "dp_count_report",
        &run(&["delpezzo", "--surface", SURFACE, "--N", "3"]),
    );
}

#[test]
fn input_schemas_accept_documented_forms() {
    let cases = [
        ("curve", r#"{"form":"short","A":"-2","B":1}"#, true),
        ("curve", r#"{"form":"long","a":[0,0,1,-1,0]}"#, true),
        ("curve", r#"{"form":"short","A":"x","B":1}"#, false),
        ("box", "[-10,10,-10,10]", true),
        ("box", r#"{"x":[0,1],"y":["-3",3]}"#, true),
        ("box", "[1,2,3]", false),
        ("surface", SURFACE, true),
        ("surface", r#"{"F4":[1,0,0,1],"F6":[1,0,0,0,0,0,1]}"#, false),
    ];
    for (schema, doc, ok) in cases {
        let doc: Value = serde_json::from_str(doc).unwrap();
        assert_eq!(validator(schema).is_valid(&doc), ok, "{schema} {doc}");
    }
}
