use std::path::PathBuf;
use std::process::{Command, Output};

fn case(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases").join(rel)
}

fn mcopf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcopf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_ivr_reports_exact_point() {
    let network = case("two_bus_two_wire.json");
    let o = mcopf(&["solve", "--network", network.to_str().unwrap(), "--formulation", "ivr", "--theta", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("1.147226"), "{text}");
    assert!(text.contains("0.874146"), "{text}");
}

#[test]
fn bogus_formulation_is_bad_input() {
    let o = mcopf(&["solve", "--formulation", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("possible values"));
}

#[test]
fn formulation_names_ignore_case() {
    assert_eq!(mcopf(&["solve", "--formulation", "SWR1"]).status.code(), Some(0));
}

#[test]
fn swr2_json_carries_small_gap() {
    let o = mcopf(&["solve", "--formulation", "swr2", "--theta", "0", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["status"], "optimal");
    assert!(doc["gap_vs_ivr"].as_f64().unwrap().abs() < 0.1);
}

#[test]
fn infeasible_bounds_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut net: serde_json::Value =
        serde_json::from_slice(&std::fs::read(case("two_bus_two_wire.json")).unwrap()).unwrap();
    net["buses"][1]["u_min"] = serde_json::json!([0.0, 0.0]);
    net["buses"][1]["u_max"] = serde_json::json!([0.1, 0.1]);
    let path = dir.path().join("tight.json");
    std::fs::write(&path, net.to_string()).unwrap();
    let o = mcopf(&["solve", "--network", path.to_str().unwrap(), "--formulation", "swr2", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["status"], "infeasible-detected");
}

#[test]
fn malformed_network_is_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ \"buses\": [").unwrap();
    let o = mcopf(&["solve", "--network", path.to_str().unwrap(), "--formulation", "ivr"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_all_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("swr2.csv");
    let o = mcopf(&["sweep", "--formulation", "swr2", "--samples", "64", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(csv.lines().next(), Some("theta,status,P,Q"));
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("optimal")));
}

#[test]
fn sweep_below_minimum_samples_is_bad_input() {
    assert_eq!(mcopf(&["sweep", "--samples", "3"]).status.code(), Some(2));
}

#[test]
fn sweep_svg_has_one_marker_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("sets.svg");
    let csv = dir.path().join("svr1.csv");
    let o = mcopf(&[
        "sweep",
        "--formulation",
        "svr1",
        "--samples",
        "64",
        "--svg",
        svg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("class=\"marker\"").count(), 64);
    assert_eq!(text.matches("<polyline").count(), 1);
    assert!(text.contains("viewBox=\"0 0 800 600\""));
}

#[test]
fn sweep_json_parses() {
    let o = mcopf(&["sweep", "--formulation", "ivr", "--samples", "4", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc[0]["records"].as_array().unwrap().len(), 4);
}

#[test]
fn check_point_files() {
    let row = |file: &str| {
        let o = mcopf(&["check", case(file).to_str().unwrap(), "--tol", "1e-6"]);
        assert_eq!(o.status.code(), Some(0));
        stdout(&o)
    };
    let exact = row("points/ivr_solution.json");
    for kind in ["ivr", "svr1", "svr2", "swr1", "swr2"] {
        assert!(exact.contains(&format!("{kind}:true")), "{exact}");
    }
    assert!(row("points/svr2_spurious.json").contains("swr2:false"));
    assert!(row("points/zero.json").contains("ivr:false"));
}

#[test]
fn check_json_parses() {
    let o = mcopf(&["check", case("points/ivr_solution.json").to_str().unwrap(), "--json"]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["feasible"]["swr2"], true);
}

#[test]
fn unreadable_solution_is_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(mcopf(&["check", missing.to_str().unwrap()]).status.code(), Some(2));
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "not json").unwrap();
    assert_eq!(mcopf(&["check", garbage.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn export_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("swr2.txt");
    let o = mcopf(&["export", "--formulation", "swr2", "--format", "conic-text", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("psd 8 "));
    assert!(text.contains("obj:"));

    let o = mcopf(&["export", "--formulation", "ivr", "--format", "qcqp-json"]);
    assert_eq!(o.status.code(), Some(0));
    let _: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();

    assert_eq!(mcopf(&["export", "--formulation", "ivr", "--format", "conic-text"]).status.code(), Some(2));
}

#[test]
fn paper_outcomes_do_not_depend_on_seed() {
    let run = |seed: &str| {
        let o = mcopf(&["paper", "--samples", "8", "--grid", "5", "--seed", seed, "--json"]);
        let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        let passes: Vec<bool> = doc["rows"].as_array().unwrap().iter().map(|r| r["pass"].as_bool().unwrap()).collect();
        (o.status.code(), passes)
    };
    let (code7, rows7) = run("7");
    let (code8, rows8) = run("8");
    assert_eq!(code7, Some(0));
    assert_eq!(code8, Some(0));
    assert_eq!(rows7, rows8);
}

#[test]
fn paper_detects_perturbed_impedance() {
    let o = mcopf(&["paper", "--samples", "8", "--grid", "5", "--perturb-z", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    let kron = stdout(&o).lines().find(|l| l.contains("Kron")).unwrap().to_string();
    assert!(kron.contains("FAIL"), "{kron}");
}
