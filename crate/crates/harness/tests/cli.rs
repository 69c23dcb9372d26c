use std::process::{Command, Output};

use crn_harness::ExperimentSpec;

fn crn_share(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crn-share")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn template_round_trips_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    let out = crn_share(&["emit-config-template", "--experiment", "frame", "--out", spec_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let mut spec = ExperimentSpec::from_json(&std::fs::read_to_string(&spec_path).unwrap()).unwrap();
    spec.grid = vec![0.2, 0.3];
    std::fs::write(&spec_path, spec.to_json()).unwrap();

    let csv1 = dir.path().join("a.csv");
    let csv2 = dir.path().join("b.csv");
    for path in [&csv1, &csv2] {
        let out = crn_share(&[
            "run", "--experiment", "frame", "--config", spec_path.to_str().unwrap(),
            "--frames", "300", "--seed", "4", "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(&csv1).unwrap();
    assert_eq!(a, std::fs::read(&csv2).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("experiment,sweep,value,strategy"));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(text.lines().all(|l| l.ends_with(",300") || l.ends_with("frames")));
}

#[test]
fn json_output_parses() {
    let out = crn_share(&["solve-frame", "--efficiency", "0.3"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "optimal");
    assert!((v["objective"].as_f64().unwrap() - 0.055097060).abs() < 1e-6);
}

#[test]
fn infeasible_target_exits_with_two() {
    assert_eq!(code(&crn_share(&["solve-frame", "--efficiency", "0.7"])), 2);
    assert_eq!(code(&crn_share(&["solve-frame", "--efficiency", "0.7", "--strategy", "sensing-free"])), 2);
}

#[test]
fn bad_input_exits_with_three() {
    assert_eq!(code(&crn_share(&["run", "--experiment", "nonsense"])), 3);
    assert_eq!(code(&crn_share(&["solve-frame", "--config", "/nonexistent.json"])), 3);
    assert_eq!(code(&crn_share(&["run", "--experiment", "frame", "--frames", "0"])), 3);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"kind\": \"frame-sweep\"}").unwrap();
    assert_eq!(code(&crn_share(&["run", "--experiment", "frame", "--config", bad.to_str().unwrap()])), 3);
    let spec = dir.path().join("ergodic.json");
    let out = crn_share(&["emit-config-template", "--experiment", "ergodic", "--out", spec.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(code(&crn_share(&["run", "--experiment", "frame", "--config", spec.to_str().unwrap()])), 3);
}

#[test]
fn validation_failure_exits_with_one() {
    let out = crn_share(&["validate", "--frames", "2000", "--mutate-phi"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL phi_vs_quadrature"));
    let out = crn_share(&["validate", "--frames", "2000"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn help_exits_cleanly() {
    let out = crn_share(&["--help"]);
    assert_eq!(code(&out), 0);
    let help = String::from_utf8_lossy(&out.stdout);
    for cmd in ["solve-frame", "train", "run", "validate", "emit-config-template"] {
        assert!(help.contains(cmd), "{cmd}");
    }
}
