use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cfnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfnet")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn layout_decompose_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let layout = dir.path().join("layout.json");
    let trace = dir.path().join("trace.csv");
    assert!(cfnet(&["gen-layout", "--seed", "11", "--k", "7", "--l", "5", "--out", s(&layout)]).status.success());

    let report = json(&cfnet(&[
        "decompose",
        "--layout",
        s(&layout),
        "--k-max",
        "3",
        "--algo",
        "bnb",
        "--mc-samples",
        "32",
        "--trace-csv",
        s(&trace),
    ]));
    assert_eq!(report["status"], "optimal");
    assert_eq!(report["decomposition"]["m"], 3);
    let trace_text = fs::read_to_string(&trace).unwrap();
    assert!(trace_text.starts_with("id,depth,selected_lb,lb,incumbent,pruned"));
    assert!(trace_text.lines().count() > 1);

    let d = dir.path().join("d.json");
    fs::write(&d, report["decomposition"].to_string()).unwrap();
    let eval = json(&cfnet(&["evaluate", "--layout", s(&layout), "--decomposition", s(&d), "--k-max", "3"]));
    let (a, b) = (eval["objective_sumcut"].as_f64().unwrap(), report["objective_sumcut"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-9 * b.abs());
    assert_eq!(eval["violations"].as_array().unwrap().len(), 0);

    // The same decomposition breaks a tighter cap.
    let tight = cfnet(&["evaluate", "--layout", s(&layout), "--decomposition", s(&d), "--k-max", "2"]);
    assert_eq!(tight.status.code(), Some(1));
}

#[test]
fn bisection_trace_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("steps.jsonl");
    let report = json(&cfnet(&[
        "decompose",
        "--seed",
        "2",
        "--k",
        "9",
        "--l",
        "6",
        "--k-max",
        "3",
        "--mc-samples",
        "0",
        "--bisect-trace",
        s(&trace),
    ]));
    assert_eq!(report["algorithm"], "bc2f");
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 2);

    let snap =
        json(&cfnet(&["snapshot", "--seed", "2", "--k", "9", "--l", "6", "--k-max", "3", "--algo", "kmeans-bs"]));
    let subnets = snap["subnetworks"].as_array().unwrap();
    assert_eq!(subnets.len(), 3);
    let ues: usize = subnets.iter().map(|e| e["ues"].as_array().unwrap().len()).sum();
    assert_eq!(ues, 9);
    assert_eq!(subnets[0]["id"], 1);
}

#[test]
fn sweep_is_reproducible_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    fs::write(
        &config,
        r#"{"k_list":[5,6],"l_list":[5],"k_max_list":[3],"realizations":2,
            "algorithms":["bnb","bc2f","brute","kmeans-ue","kmeans-bs"],"mc_samples":16}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (name, workers) in [("a.csv", "1"), ("b.csv", "3")] {
        let path = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_cfnet"))
            .env("CFNET_WORKERS", workers)
            .args(["sweep", "--config", s(&config), "--output", s(&path), "--no-timing"])
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join(name.replace(".csv", ".summary.csv")).exists());
        outputs.push(fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 5);
}

#[test]
fn errors_exit_with_two() {
    let out = cfnet(&["decompose", "--seed", "1", "--k", "6", "--l", "1", "--k-max", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = cfnet(&["decompose", "--seed", "1", "--k", "6", "--l", "4", "--k-max", "2", "--algo", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let out = cfnet(&["decompose", "--k-max", "2"]);
    assert_eq!(out.status.code(), Some(2));
}
