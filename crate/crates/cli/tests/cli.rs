use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use maneuverforge_core::agents::{schema_hash, FixtureRecord, Message};
use maneuverforge_core::plan::{jturn_template, plan_json_schema};
use serde_json::Value;

fn maneuverforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maneuverforge")).args(args).env_remove("MANEUVERGPT_API_KEY").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn fixture(dir: &Path, name: &str, n: usize, hash: Option<&str>) -> String {
    let hash = hash.map(str::to_string).unwrap_or_else(|| schema_hash(&plan_json_schema()));
    let lines: Vec<String> = (0..n)
        .map(|_| {
            serde_json::to_string(&FixtureRecord {
                request_messages: vec![Message::new("user", "Execute a J-turn maneuver.")],
                output_schema_hash: hash.clone(),
                response_json: jturn_template().to_value(),
            })
            .unwrap()
        })
        .collect();
    write(dir, name, &(lines.join("\n") + "\n"))
}

#[test]
fn scripted_run_converges_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "run");
    let o = maneuverforge(&["run", "--backend", "scripted", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("converged"));
    let result: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/run_result.json")).unwrap()).unwrap();
    assert_eq!(result["converged"], true);
    let iterations = fs::read_to_string(dir.path().join("run/iterations.csv")).unwrap();
    assert_eq!(iterations.lines().count(), result["iterations_used"].as_u64().unwrap() as usize + 1);
    let traj = fs::read_to_string(dir.path().join("run/best_trajectory.csv")).unwrap();
    assert!(traj.starts_with("time_s,x_m,y_m,heading_rad"));
}

#[test]
fn best_effort_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"loop": {"k_max": 1}, "exports": {"trajectory_csv": false}}"#);
    let o = maneuverforge(&["run", "--config", &cfg, "--out", &path(dir.path(), "o")]);
    assert_eq!(code(&o), 3);
    assert!(!dir.path().join("o/best_trajectory.csv").exists());
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", "{\n  \"loop\": {},\n  \"foo\": 1\n}\n");
    let o = maneuverforge(&["run", "--config", &cfg, "--out", &path(dir.path(), "o")]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("c.json:3:") && err.contains("foo"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn zero_trials_is_a_config_error() {
    let o = maneuverforge(&["batch", "--trials", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_api_key_fails_before_any_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"loop": {"backend": "llm"}, "llm": {"endpoint_url": "http://127.0.0.1:9/unreachable"}}"#,
    );
    let o = maneuverforge(&["run", "--config", &cfg, "--out", &path(dir.path(), "o")]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("MANEUVERGPT_API_KEY"));
}

#[test]
fn replay_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let two = fixture(dir.path(), "two.jsonl", 2, None);
    let cfg = write(dir.path(), "c.json", r#"{"loop": {"k_max": 2}}"#);
    let o = maneuverforge(&["replay", "--fixture", &two, "--config", &cfg, "--out", &path(dir.path(), "a")]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));

    let o = maneuverforge(&["replay", "--fixture", &two, "--out", &path(dir.path(), "b")]);
    assert_eq!(code(&o), 4);
    let log = fs::read_to_string(dir.path().join("b/iterations.csv")).unwrap();
    assert_eq!(log.lines().count(), 4);

    let bad = fixture(dir.path(), "bad.jsonl", 2, Some("0000"));
    let o = maneuverforge(&["replay", "--fixture", &bad, "--config", &cfg, "--out", &path(dir.path(), "c")]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("hash"));

    let o = maneuverforge(&["replay", "--fixture", &path(dir.path(), "none.jsonl")]);
    assert_eq!(code(&o), 2);
}

fn strip_wall_clock(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0).collect::<Vec<_>>().join("\n")
}

#[test]
fn batch_outputs_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"loop": {"seed": 9, "seed_jitter": 0.1, "k_max": 8}}"#);
    for (name, jobs) in [("a", "1"), ("b", "3")] {
        let o = maneuverforge(&[
            "batch",
            "--config",
            &cfg,
            "--trials",
            "12",
            "--batch-size",
            "5",
            "--jobs",
            jobs,
            "--out",
            &path(dir.path(), name),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["batch_report.json", "table1.txt", "table2.txt", "learning_progress.csv", "velocity_ci.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }
    let a = fs::read_to_string(dir.path().join("a/iterations.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("b/iterations.csv")).unwrap();
    assert_eq!(strip_wall_clock(&a), strip_wall_clock(&b));
    let learning = fs::read_to_string(dir.path().join("a/learning_progress.csv")).unwrap();
    assert_eq!(learning.lines().count(), 4);
}

#[test]
fn report_compares_two_batches() {
    let dir = tempfile::tempdir().unwrap();
    for vehicle in ["sedan", "sports_coupe"] {
        let cfg = write(
            dir.path(),
            &format!("{vehicle}.json"),
            &format!(r#"{{"loop": {{"vehicle": "{vehicle}", "k_max": 6}}}}"#),
        );
        let o = maneuverforge(&["batch", "--config", &cfg, "--trials", "3", "--out", &path(dir.path(), vehicle)]);
        assert_eq!(code(&o), 0);
    }
    let o = maneuverforge(&[
        "report",
        "--input",
        &path(dir.path(), "sedan/batch_report.json"),
        "--input",
        &path(dir.path(), "sports_coupe/batch_report.json"),
        "--out",
        &path(dir.path(), "cmp"),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("cmp/comparison.txt")).unwrap();
    assert!(table.contains("sedan") && table.contains("sports_coupe"));
    assert_eq!(table.lines().count(), 14);
}
