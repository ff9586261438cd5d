//! End-to-end checks of the command-line interface.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flowsched"))
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("flowsched-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn generate_then_validate_round_trips() {
    let path = tmp("chain.json");
    let status = bin()
        .args(["generate", "--topology", "chain", "--n", "8", "--seed", "1"])
        .arg("-o")
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());

    let graph = flowsched::TaskGraph::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(graph.node_count(), 8);
    assert!(graph.validate().is_ok());

    let out = bin().arg("validate").arg("--graph").arg(&path).output().unwrap();
    assert!(out.status.success());
    let body: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["ok"], serde_json::Value::Bool(true));
    std::fs::remove_file(&path).ok();
}

#[test]
fn validate_rejects_non_canonical_graph() {
    let path = tmp("bad.json");
    std::fs::write(
        &path,
        r#"{"nodes":[{"id":"a","kind":"source"},{"id":"b","kind":"source"},{"id":"z","kind":"sink"}],
            "edges":[{"src":"a","dst":"z","volume":4},{"src":"b","dst":"z","volume":8}]}"#,
    )
    .unwrap();
    let out = bin().arg("validate").arg("--graph").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let body: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["ok"], serde_json::Value::Bool(false));
    assert!(body["violations"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v.as_str().unwrap().contains("unequal input volumes")));
    std::fs::remove_file(&path).ok();
}

#[test]
fn schedule_matches_library_result() {
    let path = tmp("sched-graph.json");
    bin()
        .args(["generate", "--topology", "cholesky", "--t", "4", "--seed", "3"])
        .arg("-o")
        .arg(&path)
        .status()
        .unwrap();
    let out = bin()
        .args(["schedule", "--p", "4", "--variant", "sb-rlx", "--graph"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let body: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();

    let graph = flowsched::TaskGraph::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let part = flowsched::partition::partition_greedy(
        &graph,
        4,
        flowsched::partition::PartitionVariant::SbRlx,
    )
    .unwrap();
    let sched = flowsched::schedule::schedule_streaming(&graph, &part).unwrap();
    assert_eq!(body["makespan"].as_u64(), Some(sched.makespan));
    std::fs::remove_file(&path).ok();
}

#[test]
fn bench_rows_and_determinism() {
    let args = [
        "bench",
        "--topology",
        "chain",
        "--n",
        "6",
        "--graphs",
        "10",
        "--p",
        "2,4",
        "--seed",
        "9",
    ];
    let a = bin().args(args).output().unwrap();
    assert!(a.status.success());
    let b = bin().args(args).output().unwrap();
    assert_eq!(a.stdout, b.stdout, "bench output must be byte-identical");

    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "topology,seed,p,variant,t1,makespan,speedup,sslr,utilization,sim_makespan,rel_error,deadlock"
    );
    let rows: Vec<&str> = lines.collect();
    // graphs x |p| rows per variant, three variants by default.
    assert_eq!(rows.len(), 10 * 2 * 3);
    for variant in ["sb-lts", "sb-rlx", "nonstreaming"] {
        let count = rows.iter().filter(|r| r.contains(&format!(",{variant},"))).count();
        assert_eq!(count, 20, "rows for {variant}");
    }
    // Streaming rows carry simulation results; nonstreaming rows leave them
    // empty and no run deadlocks.
    for row in rows {
        assert!(!row.ends_with("true"));
        if row.contains(",nonstreaming,") {
            assert!(row.ends_with(",,"));
        } else {
            assert!(row.ends_with("false"));
        }
    }
}

#[test]
fn unknown_file_reports_machine_readable_error() {
    let out = bin()
        .args(["analyze", "--graph", "/nonexistent/graph.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("cannot read"));
}
