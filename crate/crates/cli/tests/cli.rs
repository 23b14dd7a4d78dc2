use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rpcfuzz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpcfuzz"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/idl").join(name)
}

fn fuzz_into(dir: &Path, harness: &str, budget: &str) -> Output {
    let out = dir.to_str().unwrap();
    rpcfuzz(&["fuzz", "--harness", harness, "--budget", budget, "--seed", "3", "--out", out])
}

#[test]
fn fuzz_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = fuzz_into(dir.path(), "shop", "800");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("800 calls"), "{}", stdout(&o));
    for f in ["suite.json", "tests_main.txt", "stats.csv", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["callsExecuted"], 800);
}

#[test]
fn zero_budget_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = fuzz_into(dir.path(), "ncs", "0");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("0 tests"), "{}", stdout(&o));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&rpcfuzz(&["fuzz", "--no-such-flag"])), 1);
    assert_eq!(code(&rpcfuzz(&["fuzz", "--budget", "lots"])), 1);
    assert_eq!(code(&rpcfuzz(&["fuzz", "--harness", "nope", "--budget", "1"])), 1);
    let o = rpcfuzz(&["fuzz", "--transport", "http"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--endpoint"), "{}", stderr(&o));
    assert_eq!(code(&rpcfuzz(&["--help"])), 0);
}

#[test]
fn unreachable_endpoint_exits_2() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let dir = tempfile::tempdir().unwrap();
    let endpoint = format!("http://127.0.0.1:{port}/rpc");
    let o = rpcfuzz(&[
        "fuzz",
        "--transport",
        "http",
        "--endpoint",
        &endpoint,
        "--schema",
        fixture("ncs_full.thrift").to_str().unwrap(),
        "--budget",
        "20",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("unreachable"), "{}", stderr(&o));
}

#[test]
fn parse_emits_loadable_json() {
    let o = rpcfuzz(&["parse", "--schema", fixture("bank.thrift").to_str().unwrap(), "--emit-json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("bank.json");
    std::fs::write(&json_path, stdout(&o)).unwrap();
    let again = rpcfuzz(&["parse", "--schema", json_path.to_str().unwrap(), "--emit-json"]);
    assert_eq!(code(&again), 0, "{}", stderr(&again));
    assert_eq!(stdout(&again), stdout(&o));

    let summary = rpcfuzz(&["parse", "--schema", fixture("multi.thrift").to_str().unwrap()]);
    assert!(stdout(&summary).contains("MathService:"), "{}", stdout(&summary));
}

#[test]
fn parse_errors_carry_positions() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.thrift");
    std::fs::write(&bad, "service S {\n  void f(1: i32 a\n}\n").unwrap();
    let o = rpcfuzz(&["parse", "--schema", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("3:1") || err.contains("line 3"), "{err}");
}

#[test]
fn replay_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fuzz_into(dir.path(), "ncs", "600")), 0);
    let suite_path = dir.path().join("suite.json");
    let suite = suite_path.to_str().unwrap();
    let clean = rpcfuzz(&["replay", "--suite", suite, "--harness", "ncs"]);
    assert_eq!(code(&clean), 0, "{}{}", stdout(&clean), stderr(&clean));
    assert!(stdout(&clean).contains(" 0 ER-class mismatches"), "{}", stdout(&clean));

    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&suite_path).unwrap()).unwrap();
    let first = &mut doc["tests"][0]["expected"];
    let swapped = if first["actionClasses"][0] == "ER7_HANDLED" { "ER2_USER_ERROR" } else { "ER7_HANDLED" };
    first["actionClasses"][0] = Value::from(swapped);
    std::fs::write(&suite_path, serde_json::to_string(&doc).unwrap()).unwrap();
    let tampered = rpcfuzz(&["replay", "--suite", suite, "--harness", "ncs", "--json"]);
    assert_eq!(code(&tampered), 1);
    let report: Value = serde_json::from_str(&stdout(&tampered)).unwrap();
    assert_eq!(report["mismatches"].as_array().unwrap().len(), 1);

    let missing = rpcfuzz(&["replay", "--suite", dir.path().join("none.json").to_str().unwrap()]);
    assert_eq!(code(&missing), 1);
}

#[test]
fn list_harness_text_and_json() {
    let o = rpcfuzz(&["list-harness"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let row = |label: &str| text.lines().find(|l| l.contains(label)).unwrap().to_string();
    assert!(row("ncs-analog").split_whitespace().any(|w| w == "6"));
    assert!(row("scs-analog").split_whitespace().any(|w| w == "11"));

    let j: Value = serde_json::from_str(&stdout(&rpcfuzz(&["list-harness", "--json"]))).unwrap();
    let names: Vec<&str> = j.as_array().unwrap().iter().map(|h| h["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["ncs", "scs", "shop"]);
}

#[test]
fn compare_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let json_out = dir.path().join("cmp.json");
    let o = rpcfuzz(&[
        "compare",
        "--harness",
        "ncs",
        "--seeds",
        "1..2",
        "--budget",
        "300",
        "--json-out",
        json_out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("harness"), "{}", stdout(&o));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(json_out).unwrap()).unwrap();
    assert!(report.is_object());
}
