use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rascache");

fn rascache(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const RAS_SPEC: &str = r#"{"defense":"ras-spec","rate":3,"entries":1,"window":4,"scenario":"spectre-fr","secret":30,"seed":1}"#;

#[test]
fn run_attack_baseline_leaks_with_exit_0() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.json", &RAS_SPEC.replace(r#""defense":"ras-spec","rate":3,"entries":1,"window":4"#, r#""defense":"baseline-lru""#));
    let out = d.path().join("o");
    let o = rascache(&["run-attack", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["correct"], true);
    assert_eq!(v["guessed"], 30);
}

#[test]
fn run_attack_ras_spec_defends_with_exit_0() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.json", RAS_SPEC);
    let out = d.path().join("o");
    let o = rascache(&["run-attack", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["guessed"], serde_json::Value::Null);
}

#[test]
fn injected_fill_bug_trips_leak_guard() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.json", &RAS_SPEC.replace("\"seed\":1", "\"seed\":1,\"force_fill\":true"));
    let o = rascache(&["run-attack", "--config", &cfg, "--out", d.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_and_usage_errors_exit_1() {
    let d = tempfile::tempdir().unwrap();
    let bad = write(d.path(), "bad.json", &RAS_SPEC.replace("\"window\":4", "\"window\":3"));
    let o = rascache(&["run-attack", "--config", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`window`"));
    assert_eq!(rascache(&["no-such-command"]).status.code(), Some(1));
    let good = write(d.path(), "c.json", RAS_SPEC);
    assert_eq!(rascache(&["run-trace", "--config", &good]).status.code(), Some(1));
}

#[test]
fn io_errors_exit_3() {
    let o = rascache(&["run-attack", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(rascache(&["render", "/nonexistent/m.csv"]).status.code(), Some(3));
}

#[test]
fn sweep_and_render() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "s.json",
        r#"{"base":{"defense":"ras-spec","rate":3,"entries":1,"window":4,"scenario":"trace","trace_len":2000,"seed":1},
            "grid":{"window":[1,4,16]}}"#,
    );
    let out = d.path().join("sw");
    let o = rascache(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--parallel", "3", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split(',').nth(7) == Some("7")));

    let m = write(d.path(), "m.csv", "row,c0,c1\n0,2,164\n1,164,164\n");
    let svg = d.path().join("m.svg");
    let o = rascache(&["render", &m, "--out", svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(fs::read_to_string(svg).unwrap().contains("fill=\"#000000\""));
}
