//! End-to-end checks of the binary: flags, exit codes, file outputs, and
//! byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

fn sivstar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sivstar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_toy_model(dir: &Path) -> std::path::PathBuf {
    // Two nodes, one edge, no infection pressure (beta = 0), theta/gamma > 0.
    let text = r#"{
        "m": 1, "n": 1,
        "graph": { "nodes": 2, "edges": [[0, 1]] },
        "nodes": [
            { "D": [[0.3]], "E": [[0.0]], "M": [[0.0]], "gamma": [0.4], "theta": [0.5] },
            { "D": [[0.2]], "E": [[0.0]], "M": [[0.0]], "gamma": [0.6], "theta": [0.3] }
        ],
        "edges": [ { "from": 0, "to": 1, "beta": [0.0] } ]
    }"#;
    let path = dir.join("model.json");
    std::fs::write(&path, text).expect("write model");
    path
}

#[test]
fn generate_graph_is_byte_deterministic() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out1 = dir.path().join("g1.txt");
    let out2 = dir.path().join("g2.txt");
    for out in [&out1, &out2] {
        let run = sivstar(&[
            "generate-graph",
            "--nodes",
            "20",
            "--prob",
            "0.15",
            "--seed",
            "1",
            "--require-strong",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    }
    let a = std::fs::read(&out1).expect("read");
    let b = std::fs::read(&out2).expect("read");
    assert_eq!(a, b, "same flags must produce identical bytes");
    let graph = sivstar::graph::Graph::from_edge_list(
        &String::from_utf8(a).expect("utf8"),
    )
    .expect("parses");
    assert!(graph.is_strongly_connected());
    assert_eq!(graph.node_count(), 20);
}

#[test]
fn generate_graph_retry_exhaustion_is_an_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = dir.path().join("g.txt");
    let run = sivstar(&[
        "generate-graph",
        "--nodes",
        "4",
        "--prob",
        "0",
        "--seed",
        "1",
        "--require-strong",
        "--max-tries",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("strongly connected"));
    assert!(!out.exists());
}

#[test]
fn unknown_flag_exits_with_usage_error() {
    let run = sivstar(&["generate-graph", "--definitely-not-a-flag", "3"]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn stability_reports_stable_verdicts_for_beta_zero_model() {
    let dir = tempfile::tempdir().expect("tempdir");
    let model = write_toy_model(dir.path());
    let run = sivstar(&["stability", "--model", model.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let json: serde_json::Value =
        serde_json::from_slice(&run.stdout).expect("stdout is JSON");
    assert_eq!(json["global_sufficient"], true);
    assert_eq!(json["local_iff"], true);
    assert!(json["lambda_wxx"].as_f64().expect("number") < 0.0);
    assert!(json["equilibrium_residual"].as_f64().expect("number") < 1e-10);
}

#[test]
fn simulate_ode_writes_trajectory_and_summary() {
    let dir = tempfile::tempdir().expect("tempdir");
    let model = write_toy_model(dir.path());
    let out = dir.path().join("run");
    let run = sivstar(&[
        "simulate-ode",
        "--model",
        model.to_str().unwrap(),
        "--horizon",
        "5",
        "--step",
        "0.05",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let trajectory = std::fs::read_to_string(out.join("trajectory.csv")).expect("file");
    assert!(trajectory.starts_with("t,node,S,I1,V1\n"));
    assert_eq!(trajectory.lines().count(), 1 + 101 * 2); // header + 101 times x 2 nodes
    let summary = std::fs::read_to_string(out.join("summary.csv")).expect("file");
    assert!(summary.starts_with("t,P_min,P_avg,P_max\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).expect("file"))
            .expect("manifest JSON");
    assert_eq!(manifest["command"], "simulate-ode");
    assert_eq!(manifest["seed"], 2);
}

#[test]
fn simulate_ctmc_event_log_and_ensemble() {
    let dir = tempfile::tempdir().expect("tempdir");
    let model = write_toy_model(dir.path());
    let out = dir.path().join("one");
    let run = sivstar(&[
        "simulate-ctmc",
        "--model",
        model.to_str().unwrap(),
        "--horizon",
        "10",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let events = std::fs::read_to_string(out.join("events.csv")).expect("file");
    assert!(events.starts_with("t,node,from,to\n"));

    let out2 = dir.path().join("many");
    let run = sivstar(&[
        "simulate-ctmc",
        "--model",
        model.to_str().unwrap(),
        "--horizon",
        "4",
        "--runs",
        "50",
        "--grid-step",
        "1",
        "--seed",
        "3",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let ensemble = std::fs::read_to_string(out2.join("ensemble.csv")).expect("file");
    assert!(ensemble.starts_with("t,node,label,frequency\n"));
    // 5 grid times x 2 nodes x 3 labels rows.
    assert_eq!(ensemble.lines().count(), 1 + 5 * 2 * 3);
}

#[test]
fn fit_expand_sweep_pipeline() {
    let dir = tempfile::tempdir().expect("tempdir");
    let model = write_toy_model(dir.path());

    // Small exponential fit: p = 1 recovers the rate.
    let ph_path = dir.path().join("ph.json");
    let run = sivstar(&[
        "fit-ph",
        "--target",
        "exponential",
        "--rate",
        "0.5",
        "--phases",
        "1",
        "--samples",
        "2000",
        "--max-iters",
        "100",
        "--restarts",
        "2",
        "--seed",
        "4",
        "--out",
        ph_path.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout).to_string();
    assert!(stdout.contains("fitted_mean"), "report printed: {stdout}");
    let ph = sivstar::phasetype::PhaseType::load(&ph_path).expect("valid phase-type JSON");
    assert!((ph.mean() - 2.0).abs() / 2.0 < 0.1, "mean {}", ph.mean());

    // Expand the toy model with the fitted distribution.
    let expanded_path = dir.path().join("expanded.json");
    let run = sivstar(&[
        "expand",
        "--model",
        model.to_str().unwrap(),
        "--ph",
        ph_path.to_str().unwrap(),
        "--beta",
        "0.25",
        "--delta",
        "0.2",
        "--out",
        expanded_path.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let expanded = sivstar::model::load_model(&expanded_path).expect("valid model");
    assert_eq!(expanded.m(), 2);

    // Sweep the expanded model across a small multiplier grid.
    let sweep_path = dir.path().join("sweep.csv");
    let run = sivstar(&[
        "sweep",
        "--model",
        expanded_path.to_str().unwrap(),
        "--grid",
        "0.5,1.0,2.0",
        "--max-horizon",
        "80",
        "--step",
        "0.02",
        "--seed",
        "5",
        "--out",
        sweep_path.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let sweep = std::fs::read_to_string(&sweep_path).expect("file");
    assert!(sweep.starts_with("multiplier,lambda_qxx,p_inf_min,p_inf_avg,p_inf_max,converged\n"));
    assert_eq!(sweep.lines().count(), 1 + 3);
}

#[test]
fn missing_model_file_exits_one() {
    let run = sivstar(&["stability", "--model", "/nonexistent/model.json"]);
    assert_eq!(run.status.code(), Some(1));
}
