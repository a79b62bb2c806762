//! End-to-end runs of the `herdwatch` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SKYPE: &str = r#"{
  "model": {
    "X": 2, "Y": 2,
    "B": [[0.7, 0.3], [0.3, 0.7]],
    "P": [[1.0, 0.0], [0.04, 0.96]],
    "c": [[0.5, 1.0], [1.0, 0.5]],
    "alpha": 0.45
  },
  "observer": {"f": [0.0, 2.0], "d": 0.8, "rho": 0.9},
  "solver": {"grid_points": 501},
  "sim": {"replicates": 200, "horizon": 300, "seed": 4, "pi0": [0.1, 0.9]}
}"#;

fn herdwatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_herdwatch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn validate_reports_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SKYPE);
    let out = herdwatch(&["validate", "--config", &cfg]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["assumptions"]["b_is_tp2"], true);
    assert_eq!(v["certified"], true);
}

#[test]
fn malformed_config_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SKYPE.replace("[0.7, 0.3], [0.3, 0.7]", "[0.7, 0.4], [0.3, 0.7]");
    let cfg = write_config(dir.path(), &bad);
    let out = herdwatch(&["validate", "--config", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.B[1]"));

    let cfg = write_config(dir.path(), "{\"model\": 3}");
    assert_eq!(code(&herdwatch(&["validate", "--config", &cfg])), 1);
    assert_eq!(
        code(&herdwatch(&["validate", "--config", "/nonexistent.json"])),
        1
    );
}

#[test]
fn unknown_subcommand_and_flags_are_rejected() {
    assert_eq!(code(&herdwatch(&["frobnicate"])), 1);
    assert_eq!(code(&herdwatch(&["cvar", "--atoms", "1:1"])), 1);
    assert_eq!(code(&herdwatch(&["--help"])), 0);
}

#[test]
fn cvar_prints_value_and_minimizer() {
    let out = herdwatch(&["cvar", "--atoms", "1:0.5,3:0.5", "--alpha", "0.5"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!((v["cvar"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(v["z_star"].as_f64().unwrap(), 1.0);
    assert_eq!(
        code(&herdwatch(&[
            "cvar",
            "--atoms",
            "1:0.5,3:0.4",
            "--alpha",
            "0.5"
        ])),
        1
    );
    assert_eq!(
        code(&herdwatch(&["cvar", "--atoms", "1:1", "--alpha", "0"])),
        1
    );
}

#[test]
fn filter_reports_both_updates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SKYPE);
    let out = herdwatch(&[
        "filter",
        "--config",
        &cfg,
        "--belief",
        "0.4,0.6",
        "--observation",
        "2",
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let sigma: f64 = v["public_updates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|u| u["sigma"].as_f64().unwrap())
        .sum();
    assert!((sigma - 1.0).abs() < 1e-12);
    assert_eq!(
        code(&herdwatch(&[
            "filter",
            "--config",
            &cfg,
            "--observation",
            "3"
        ])),
        1
    );
}

#[test]
fn regions_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SKYPE);
    let out_dir = dir.path().join("out");
    let out = herdwatch(&[
        "regions",
        "--config",
        &cfg,
        "--grid",
        "500",
        "--alphas",
        "1,0.5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("regions.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn solve_simulate_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SKYPE);
    let out_dir = dir.path().join("out");
    let out_str = out_dir.to_str().unwrap();

    let out = herdwatch(&["solve", "--config", &cfg, "--out", out_str]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let policy = fs::read_to_string(out_dir.join("policy.csv")).unwrap();
    assert!(policy.starts_with("pi2,value,action\n"));
    assert_eq!(policy.lines().count(), 502);
    assert!(out_dir.join("stopping_set.json").exists());

    let run = |seed: &str| {
        let out = herdwatch(&[
            "simulate", "--config", &cfg, "--seed", seed, "--out", out_str,
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        (
            fs::read(out_dir.join("metrics.json")).unwrap(),
            fs::read(out_dir.join("trajectory.csv")).unwrap(),
        )
    };
    assert_eq!(run("9"), run("9"));

    let actions = dir.path().join("actions.csv");
    fs::write(&actions, "t,action\n1,2\n2,2\n3,2\n4,2\n5,1\n").unwrap();
    let out = herdwatch(&[
        "replay",
        "--config",
        &cfg,
        "--input",
        actions.to_str().unwrap(),
        "--out",
        out_str,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["steps"], 5);
    assert_eq!(
        fs::read_to_string(out_dir.join("replay.csv"))
            .unwrap()
            .lines()
            .count(),
        7
    );

    // A buy while everyone herds on sell has probability zero.
    fs::write(&actions, "t,action\n1,1\n").unwrap();
    let out = herdwatch(&[
        "replay",
        "--config",
        &cfg,
        "--input",
        actions.to_str().unwrap(),
        "--out",
        out_str,
    ]);
    assert_eq!(code(&out), 2);

    fs::write(&actions, "t,action\n1,3\n").unwrap();
    let out = herdwatch(&[
        "replay",
        "--config",
        &cfg,
        "--input",
        actions.to_str().unwrap(),
        "--out",
        out_str,
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn solve_without_convergence_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = SKYPE.replace(
        "\"grid_points\": 501",
        "\"grid_points\": 101, \"max_iter\": 3",
    );
    let cfg = write_config(dir.path(), &text);
    let out = herdwatch(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn reproduce_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = herdwatch(&["reproduce", "--target", "skype", "--out", out_dir]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("skype_summary.txt").exists());
    assert!(dir.path().join("skype_policy.csv").exists());
    assert_eq!(
        code(&herdwatch(&[
            "reproduce",
            "--target",
            "fig9",
            "--out",
            out_dir
        ])),
        1
    );
}
