use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_swarm-sync"));
    c.env_remove("SWARM_SYNC_EVENT_CAP");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn three_worst_scenario_places_the_group_at_delta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    ok(&["scenario", "three-worst", "--N", "1000000", "-o", p(&cfg)]);
    let v = json(&cfg);
    assert_eq!(v["n"], 3);
    assert_eq!(v["drones"][1]["x"], "1/1000000");
    assert_eq!(v["drones"][2]["x"], "1/1000000");
}

#[test]
fn phase2_sharp_has_correct_estimates() {
    let out = ok(&["scenario", "phase2-sharp", "--n", "5", "--eps", "1/1000"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let drones = v["drones"].as_array().unwrap();
    assert_eq!(drones.len(), 5);
    assert_eq!(drones[0]["a"], serde_json::json!(["0/1", 0]));
    assert_eq!(drones[0]["b"], serde_json::json!(["1/1", 4]));
    assert_eq!(drones[4]["a"], serde_json::json!(["0/1", 4]));
}

#[test]
fn random_scenario_is_reproducible() {
    let a = ok(&["scenario", "random", "--n", "6", "--seed", "42", "--estimates", "correct"]);
    let b = ok(&["scenario", "random", "--n", "6", "--seed", "42", "--estimates", "correct"]);
    assert_eq!(a, b);
    let c = ok(&["scenario", "random", "--n", "6", "--seed", "43", "--estimates", "correct"]);
    assert_ne!(a, c);
}

#[test]
fn run_is_deterministic_and_analyze_reports_the_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let (t1, t2) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    ok(&["scenario", "three-worst", "--N", "10000", "-o", p(&cfg)]);
    ok(&["run", p(&cfg), "-o", p(&t1)]);
    ok(&["run", p(&cfg), "-o", p(&t2)]);
    assert_eq!(fs::read(&t1).unwrap(), fs::read(&t2).unwrap());

    let header: serde_json::Value =
        serde_json::from_str(fs::read_to_string(&t1).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["t_max"], "6/1");

    let report: serde_json::Value = serde_json::from_str(&ok(&["analyze", p(&t1)])).unwrap();
    let phase1 = report["correct_estimates_time"]["approx"].as_f64().unwrap();
    let total = report["full_sync_time"]["approx"].as_f64().unwrap();
    assert!((phase1 - 11.0 / 3.0).abs() < 0.01, "{phase1}");
    assert!((total - 4.0).abs() < 0.01, "{total}");
    assert!(report["full_sync_time"]["exact"].as_str().unwrap().contains('/'));
}

#[test]
fn short_horizon_is_a_horizon_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let trace = dir.path().join("t.jsonl");
    ok(&["scenario", "three-worst", "--N", "1000", "-o", p(&cfg)]);
    ok(&["run", p(&cfg), "--t-max", "5", "-o", p(&trace)]);
    let out = run(&["analyze", p(&trace)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("HorizonError"));
}

#[test]
fn single_drone_report_and_sawtooth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"n":1,"policy":"escort_left","drones":[{"x":"0.25","d":1,"a":["-3",2],"b":["2.5",7]}]}"#,
    )
    .unwrap();
    let trace = dir.path().join("t.jsonl");
    ok(&["run", p(&cfg), "-o", p(&trace)]);
    let report: serde_json::Value = serde_json::from_str(&ok(&["analyze", p(&trace)])).unwrap();
    assert_eq!(report["full_sync_time"]["exact"], "0/1");
    assert_eq!(report["left_sync_time"][0]["exact"], "0/1");
    assert!(report["correct_estimates_time"]["approx"].as_f64().unwrap() <= 2.0);

    let svg = ok(&["svg", p(&trace), "--events"]);
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(svg.matches("<circle").count() >= 6);
}

#[test]
fn event_cap_from_flag_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    ok(&["scenario", "phase2-sharp", "--n", "3", "-o", p(&cfg)]);
    let out = run(&["run", p(&cfg), "--event-cap", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("EventCapError"));

    let out = bin().args(["run", p(&cfg)]).env("SWARM_SYNC_EVENT_CAP", "1").output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = bin().args(["run", p(&cfg)]).env("SWARM_SYNC_EVENT_CAP", "lots").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_configurations_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"n":2,"policy":"escort_left","drones":[
            {"x":"1/2","d":1,"a":["0",0],"b":["1",1]},
            {"x":"1/4","d":1,"a":["0",1],"b":["1",0]}]}"#,
    )
    .unwrap();
    let out = run(&["run", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("OrderingError"));

    let out = run(&["scenario", "no-such-scenario"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["scenario", "three-worst", "--N", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ParamError"));
}

#[test]
fn policy_flag_sets_the_scenario_policy() {
    let out = ok(&["--policy", "escort-right", "scenario", "five-three-groups"]);
    assert!(out.contains("\"escort_right\""));
}

#[test]
fn verify_suites() {
    let out = ok(&["verify", "algebra", "--trials", "2000"]);
    assert!(out.contains("algebra: pass"));
    let out = ok(&["verify", "phase2", "--n-max", "4", "--trials", "20", "--seed", "7"]);
    assert!(out.contains("phase2: pass"));
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["verify", "algebra-plus-ones", "--trials", "2000", "-o", p(dir.path())]);
    assert!(out.contains("witness {"));
    assert!(dir.path().join("witnesses.json").exists());
}

#[test]
fn failing_suite_exits_with_four_and_writes_counterexamples() {
    // Fails on the five-drone example, whose published constants land about
    // 0.05 short of its targets.
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "lower-bounds", "--N", "1000", "-o", p(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL five drones in three groups"), "{stdout}");
    assert!(stdout.contains("PASS two drones"));
    assert!(dir.path().join("failure-0.json").exists());
    assert!(dir.path().join("failure-0.jsonl").exists());
}
