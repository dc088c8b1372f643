use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delayrisk")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.extend(["--format", "json"]);
    serde_json::from_str(&stdout(&a)).expect("valid JSON")
}

fn csv_records(text: &str) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().clone();
    let rows = r.records().collect::<Result<Vec<_>, _>>().expect("rectangular CSV");
    (header, rows)
}

#[test]
fn example_one_analysis() {
    let (h, rows) = csv_records(&stdout(&["analyze", "--example", "1"]));
    assert_eq!(h.iter().collect::<Vec<_>>(), ["tau", "t", "observable", "measure", "value", "classification"]);
    let steady_avg: Vec<_> = rows.iter().filter(|r| r[1].is_empty() && &r[2] == "average").collect();
    assert!(steady_avg.iter().all(|r| &r[4] == "inf" && &r[5] == "unsafe"));
    // transient rows for all five observables over the default time grid
    assert_eq!(rows.iter().filter(|r| &r[1] == "15" && &r[3] == "var").count(), 5);
}

#[test]
fn topology_analysis_matches_table() {
    let (_, a) = csv_records(&stdout(&["analyze", "--topology", "complete:4", "--tau", "0.1", "--obs", "deviation:2"]));
    let (_, t) = csv_records(&stdout(&["table", "--topology", "complete:4", "--tau", "0.1"]));
    let va: f64 = a.iter().find(|r| &r[3] == "var").unwrap()[4].parse().unwrap();
    let vt: f64 = t[1][4].parse().unwrap();
    assert!((va - vt).abs() < 1e-10, "{va} vs {vt}");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["analyze", "--topology", "complete:4", "--tau", "0.5"]).status.code(), Some(3));
    assert_eq!(run(&["table", "--topology", "ring:7", "--tau", "5"]).status.code(), Some(3));
    assert_eq!(run(&["analyze", "--topology", "complete:4", "--tau", "0.1", "--eps", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "--tau", "0.1"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "--graph", "/nonexistent/graph.txt", "--tau", "0.1"]).status.code(), Some(2));
    assert_eq!(run(&["sweep", "--topology", "path:5", "--tau-grid", "0.1:0.2:0.05", "--measure", "exp"]).status.code(), Some(2));
    let err = run(&["analyze", "--topology", "complete:4", "--tau", "0.5"]);
    assert!(String::from_utf8_lossy(&err.stderr).contains("tau_max = 0.39269908"));
}

#[test]
fn graph_file_input() {
    let dir = std::env::temp_dir().join(format!("delayrisk-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.txt");
    std::fs::write(&path, "# example one\n5\n1 2 2\n1 3 3.2\n2 5 0.1\n2 3 5\n3 4 0.2\n4 5 0.3\n").unwrap();
    let j = json(&["analyze", "--graph", path.to_str().unwrap(), "--tau", "0.1"]);
    assert!((j["tau_max"].as_f64().unwrap() - 0.1211).abs() < 5e-4);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_example_two_is_a_staircase() {
    let j = json(&["sweep", "--example", "2"]);
    assert_eq!(j["staircase"], Value::Bool(true));
    let rows = j["rows"].as_array().unwrap();
    for r in rows {
        let total: u64 = ["safe", "marginal", "unsafe"].iter().map(|k| r[k].as_u64().unwrap()).sum();
        assert_eq!(total, 100);
    }
    let last = rows.last().unwrap();
    assert_eq!(last["safe"].as_u64(), Some(0));
    assert_eq!(rows[0]["safe"].as_u64(), Some(100));
}

#[test]
fn tradeoff_has_no_violations_and_is_deterministic() {
    let args = ["tradeoff", "--n", "8", "--tau", "0.4", "--count", "200", "--seed", "5", "--complete-curve"];
    let a = stdout(&args);
    assert_eq!(a, stdout(&args));
    let (h, rows) = csv_records(&a);
    assert_eq!(h.len(), 5);
    let points: Vec<_> = rows.iter().filter(|r| &r[0] == "point").collect();
    assert_eq!(points.len(), 200);
    assert!(points.iter().all(|r| &r[3] == "true" && &r[4] == "true"));
    assert!(rows.iter().any(|r| &r[0] == "complete"));
}

#[test]
fn ring_table_has_one_group() {
    let (_, rows) = csv_records(&stdout(&["table", "--topology", "ring:7", "--tau-grid", "0.1:0.3:0.1"]));
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r[5] == rows[0][5]));
}

#[test]
fn simulate_example_one_agrees_with_theory() {
    let j = json(&["simulate", "--example", "1", "--trajectories", "400", "--seed", "3"]);
    assert!(j["fraction_within_3"].as_f64().unwrap() >= 0.95);
}

#[test]
fn limits_report_passes_on_example_one() {
    let j = json(&["limits", "--example", "1"]);
    let reports = j["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 4);
    assert!(reports.iter().all(|r| r["flags"].as_object().unwrap().values().all(|v| v == &Value::Bool(true))));
    assert_eq!(j["vector"].as_array().unwrap().len(), 1);
}

#[test]
fn output_file_is_written() {
    let path = std::env::temp_dir().join(format!("delayrisk-out-{}.csv", std::process::id()));
    stdout(&["table", "--topology", "star:5", "--tau", "0.1", "--out", path.to_str().unwrap()]);
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(text.starts_with("kind,n,node,tau,risk,group\n"));
    assert_eq!(text.lines().count(), 6);
}
