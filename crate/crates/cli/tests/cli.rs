use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn treeflag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treeflag"))
        .args(args)
        .env("TREEFLAG_LOG", "warn")
        .env_remove("TREEFLAG_JSON")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn manifest(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn json_checked(args: &[&str], schema: &str) -> Value {
    let mut all = args.to_vec();
    all.push("--json");
    let o = treeflag(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(manifest(&format!("schemas/{schema}.json"))).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema}: {errors:?}");
    v
}

#[test]
fn enumerate_six() {
    let o = treeflag(&["enumerate", "--leaves", "6"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 6);
    let v = json_checked(&["enumerate", "--leaves", "8"], "enumerate");
    assert_eq!(v["count"], 23);
}

#[test]
fn product_of_worked_example() {
    let o = treeflag(&["product", "--f1", "(1(**))", "--f2", "(1(**))"]);
    assert_eq!(stdout(&o).trim(), "1/3 ((**)(1(**))) + 1 (1((**)(**))) + 1 (1(*(*(**))))");
    let v = json_checked(&["product", "--f1", "(1*)", "--f2", "(1(**))", "--unlabel"], "product");
    assert_eq!(v["terms"]["((**)(**))"], "1/3");
    assert_eq!(v["terms"]["(*(*(**)))"], "1/3");
}

#[test]
fn blocks_table() {
    let o = treeflag(&["blocks", "--level", "7"]);
    assert_eq!(stdout(&o).lines().next().unwrap(), "20_1 9_3 4_1 1_11");
    let v = json_checked(&["blocks", "--level", "8"], "blocks");
    assert_eq!(v["sum"], 186);
    let dir = tempfile::tempdir().unwrap();
    let o = treeflag(&["blocks", "--level", "4", "--dump", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 4);
}

#[test]
fn inducibility_of_open_tree() {
    let v = json_checked(&["inducibility", "--tree", "(*((**)(**)))", "--level", "6"], "inducibility");
    assert_eq!(v["status"], "optimal");
    assert!((v["objective"].as_f64().unwrap() - 0.2602938).abs() < 1e-6);
}

#[test]
fn rounding_writes_verifiable_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("e5.json");
    let sdpa = dir.path().join("e5.dat-s");
    let v = json_checked(
        &[
            "inducibility",
            "--tree",
            "((*(**))(**))",
            "--level",
            "5",
            "--cert-out",
            cert.to_str().unwrap(),
            "--export",
            sdpa.to_str().unwrap(),
        ],
        "inducibility",
    );
    assert!(v["rigorous_bound_float"].as_f64().unwrap() - 2.0 / 3.0 < 1e-4);
    let w = json_checked(&["verify", "--cert", cert.to_str().unwrap()], "verify");
    assert_eq!(w["verified"], true);
    assert!(std::fs::read_to_string(sdpa).unwrap().contains("2 5 -5"));
}

#[test]
fn verify_shipped_certificates() {
    let e5 = manifest("../core/tests/data/e5_exact.json");
    let o = treeflag(&["verify", "--cert", e5.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "verified: bound 2/3");
    let mut text = std::fs::read_to_string(&e5).unwrap();
    text = text.replace("\"2/3\"", "\"665/1000\"");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, text).unwrap();
    let o = treeflag(&["verify", "--cert", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let w = json_checked(
        &["verify", "--cert", manifest("../core/tests/data/cat4_e6_bound.json").to_str().unwrap()],
        "verify",
    );
    assert_eq!(w["verified"], true);
}

#[test]
fn export_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.dat-s");
    let v = json_checked(&["export", "--tree", "(*(**))", "--level", "4", "--out", out.to_str().unwrap()], "export");
    assert_eq!(v["constraints"], 2);
    assert!(out.exists());
}

#[test]
fn profile_anchor_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let svg = dir.path().join("p.svg");
    let o = treeflag(&[
        "profile", "--x", "(*(*(**)))", "--y", "((*(**))(*(**)))", "--level", "6", "--anchors", "5/8",
        "--out", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap(), "--threads", "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("slice_lo,slice_hi,lower_slope"));
    assert!(std::fs::read_to_string(svg).unwrap().contains("polyline"));
    json_checked(
        &["profile", "--x", "(*(*(**)))", "--y", "((*(**))(*(**)))", "--level", "6", "--anchors", "3/4", "--anchor-width", "1/20"],
        "profile",
    );
}

#[test]
fn exit_codes() {
    assert_eq!(treeflag(&["product", "--f1", "(1(**", "--f2", "*"]).status.code(), Some(2));
    assert_eq!(treeflag(&["inducibility", "--tree", "((**)", "--level", "5"]).status.code(), Some(2));
    assert_eq!(treeflag(&["enumerate"]).status.code(), Some(2));
    assert_eq!(treeflag(&["inducibility", "--tree", "(*(**))", "--level", "5", "--solver", "nope"]).status.code(), Some(1));
    assert_eq!(treeflag(&["inducibility", "--tree", "(*(*(*(**))))", "--level", "4"]).status.code(), Some(1));
    let o = treeflag(&["verify", "--cert", "/nonexistent.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn env_defaults_apply() {
    let o = Command::new(env!("CARGO_BIN_EXE_treeflag"))
        .args(["blocks"])
        .env("TREEFLAG_LEVEL", "5")
        .env("TREEFLAG_LOG", "warn")
        .output()
        .unwrap();
    // blocks takes --level from the command line only
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_treeflag"))
        .args(["export", "--tree", "(*(**))", "--out", "/dev/null", "--json"])
        .env("TREEFLAG_LEVEL", "5")
        .env("TREEFLAG_LOG", "warn")
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(v["constraints"], 3);
}

#[test]
fn deterministic_output_across_thread_counts() {
    let a = treeflag(&["inducibility", "--tree", "(*(**))", "--level", "6", "--threads", "1"]);
    let b = treeflag(&["inducibility", "--tree", "(*(**))", "--level", "6", "--threads", "4"]);
    assert_eq!(stdout(&a), stdout(&b));
}
