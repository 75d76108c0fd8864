use std::path::Path;
use std::process::Command;

use classalg::model::Attributes;
use classalg::{document, parse_class_expr, Store, Value};
use classalg_server::cli::run;
use serde_json::Value as Json;

fn fixture(dir: &Path) -> std::path::PathBuf {
    let mut s = Store::new();
    for (age, dept) in [(25, "x"), (35, "x"), (45, "y"), (55, "y")] {
        let mut a = Attributes::new();
        a.insert("age".into(), vec![Value::int(age)]);
        a.insert("dept".into(), vec![Value::str(dept)]);
        s.create_object(a).unwrap();
    }
    s.create_object(Attributes::new()).unwrap();
    s.define_class("a", parse_class_expr("any where age<40").unwrap())
        .unwrap();
    s.define_class("b", parse_class_expr("any where dept=\"y\"").unwrap())
        .unwrap();
    let p = dir.join("world.json");
    document::save(s.data(), &p).unwrap();
    p
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(
        std::iter::once("classalg").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json_of(args: &[&str]) -> Json {
    let mut v = args.to_vec();
    v.extend(["--format", "json"]);
    let (code, out, err) = cli(&v);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

#[test]
fn normalize_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path());
    let f = f.to_str().unwrap();
    let first = cli(&["--file", f, "normalize", "a+b"]);
    let second = cli(&["--file", f, "normalize", "a+b"]);
    assert_eq!(first.0, 0);
    assert_eq!(first, second);
    assert!(!first.1.trim().is_empty());
}

#[test]
fn query_on_empty_store_is_an_engine_error() {
    let (code, out, err) = cli(&["query", "any"]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.starts_with("error[EmptyUniverse]"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cli(&["frobnicate"]).0, 2);
    assert_eq!(cli(&["query"]).0, 2);
    assert_eq!(cli(&["--format", "xml", "load"]).0, 2);
    assert_eq!(cli(&["--help"]).0, 0);
}

#[test]
fn query_reports_extent_and_probability() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path());
    let v = json_of(&["--file", f.to_str().unwrap(), "query", "a"]);
    assert_eq!(v["trueSet"], serde_json::json!([1, 2]));
    // A plain comparison on a missing attribute is false.
    assert_eq!(v["falseSet"], serde_json::json!([3, 4, 5]));
    assert_eq!(v["unknownSet"], serde_json::json!([]));
    assert_eq!(v["probability"]["exact"], "0.4");
    assert_eq!(v["beliefInterval"]["lower"]["exact"], "0.4");
    assert_eq!(v["beliefInterval"]["upper"]["exact"], "0.4");

    let (code, table, _) = cli(&["--file", f.to_str().unwrap(), "query", "a"]);
    assert_eq!(code, 0);
    assert!(table.contains("trueSet"), "{table}");
    assert!(table.contains("0.4"), "{table}");
}

#[test]
fn read_commands_accept_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path());
    let f = f.to_str().unwrap();
    for cmd in [
        vec!["load"],
        vec!["describe", "1,2"],
        vec!["implications"],
        vec!["suggest-rules"],
        vec!["summarize", "dept"],
        vec!["hierarchy"],
        vec!["classes"],
    ] {
        for fmt in ["json", "table"] {
            let mut args = vec!["--file", f, "--format", fmt];
            args.extend(&cmd);
            let (code, out, err) = cli(&args);
            assert_eq!(code, 0, "{cmd:?} {fmt}: {err}");
            assert!(!out.is_empty());
            if fmt == "json" {
                serde_json::from_str::<Json>(&out).unwrap();
            }
        }
    }
    let d = json_of(&["--file", f, "describe", "1", "2"]);
    assert_eq!(d["perClassMembership"][0]["class"], "a");
    assert_eq!(cli(&["--file", f, "describe", "99"]).0, 1);
    assert_eq!(cli(&["--file", f, "summarize", "nope"]).0, 1);
}

#[test]
fn constrain_rejects_type_1_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path());
    let before = std::fs::read_to_string(&f).unwrap();
    let (code, _, err) = cli(&[
        "--file",
        f.to_str().unwrap(),
        "constrain",
        "Pr(a|b) >= 0.4",
        "Pr(b|a) >= 0.4",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("Type 1"), "{err}");
    assert_eq!(std::fs::read_to_string(&f).unwrap(), before);
}

#[test]
fn constrain_writes_back() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path());
    let f = f.to_str().unwrap();
    let dry = json_of(&["--file", f, "constrain", "--dry-run", "Pr(b|a) >= 0.5"]);
    assert_eq!(dry["valid"], true);
    assert_eq!(
        document::load(Path::new(f))
            .unwrap()
            .data()
            .ledger()
            .total(),
        0
    );

    let r = json_of(&["--file", f, "constrain", "Pr(b|a) >= 0.5"]);
    assert!(!r["allocations"].as_array().unwrap().is_empty());
    let s = document::load(Path::new(f)).unwrap();
    assert_eq!(s.data().constraints().len(), 1);
    assert_eq!(s.data().ledger().total(), 2);
    let p = json_of(&["--file", f, "query", "a*b"]);
    assert_eq!(p["counts"]["true"], 2);
}

#[test]
fn save_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path());
    let out = dir.path().join("copy.json");
    let (code, _, err) = cli(&["--file", f.to_str().unwrap(), "save", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(std::fs::read(&f).unwrap(), std::fs::read(&out).unwrap());
    let (code, _, err) = cli(&[
        "--file",
        dir.path().join("missing.json").to_str().unwrap(),
        "load",
    ]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[IoError]"), "{err}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_classalg");
    let st = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let o = st(&["query", "any"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("EmptyUniverse"));
    assert_eq!(st(&["no-such-command"]).status.code(), Some(2));
    let o = st(&["normalize", "any where x<1 V x<2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "sdnf  x<2");
}
