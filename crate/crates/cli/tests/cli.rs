use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).display().to_string()
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).expect("stdout is JSON")
    }
}

fn run(out_dir: &Path, args: &[&str]) -> Run {
    let mut argv = vec!["impctl".to_string(), "--out-dir".into(), out_dir.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = impctl::run(argv, &mut out, &mut err);
    Run { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let p: PathBuf = dir.join(name);
    fs::write(&p, contents).unwrap();
    p.display().to_string()
}

#[test]
fn check_verdicts_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let s1 = run(dir.path(), &["check", "--system", &data("s1.json")]);
    assert_eq!(s1.code, 0, "{}", s1.stderr);
    assert_eq!(s1.json()["verdict"], "controllable");
    assert_eq!(s1.json()["schema"], 1);

    let s2 = run(dir.path(), &["check", "--system", &data("s2.json"), "--emit-matrices"]);
    assert_eq!(s2.code, 3);
    let report = s2.json();
    assert_eq!(report["verdict"], "not_controllable");
    let w: Vec<Vec<f64>> = serde_json::from_value(report["matrices"]["total"]["matrix"].clone()).unwrap();
    assert!((w[0][0] - 1.0).abs() < 1e-12 && w[0][1] == 0.0 && w[1][0] == 0.0 && w[1][1] == 0.0);
    let saved: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("check.json")).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let status = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_impctl"))
            .arg("--out-dir")
            .arg(dir.path())
            .args(args)
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(status(&["check", "--system", &data("s1.json")]), Some(0));
    assert_eq!(status(&["check", "--system", &data("s2.json")]), Some(3));
    assert_eq!(status(&["check", "--system", "/nonexistent/system.json"]), Some(1));
    assert_eq!(status(&["no-such-command"]), Some(1));
}

#[test]
fn malformed_input_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"generator": {"dense": [[0]]}, "B": [[1]], "horizon_b": 1, "stages": [{"t": 0.5, "C": "x", "D": [[1]]}]}"#,
    );
    let r = run(dir.path(), &["simulate", "--system", &bad]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("stages[0].C"), "{}", r.stderr);

    let typo = write(dir.path(), "typo.json", r#"{"generator": {"dense": [[0]]}, "B": [[1]], "horizon": 1}"#);
    let r = run(dir.path(), &["gramian", "--system", &typo]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("horizon"), "{}", r.stderr);

    let not_json = write(dir.path(), "broken.json", "{");
    assert_eq!(run(dir.path(), &["check", "--system", &not_json]).code, 1);
}

#[test]
fn invalid_systems_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let late = write(
        dir.path(),
        "late.json",
        r#"{"generator": {"dense": [[0]]}, "B": [[1]], "horizon_b": 1, "stages": [{"t": 1.5, "C": [[0]], "D": [[1]]}]}"#,
    );
    let r = run(dir.path(), &["check", "--system", &late]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("impulse time outside"), "{}", r.stderr);

    let r = run(dir.path(), &["synthesize", "--system", &data("s1.json"), "--target", "1,2", "--epsilon", "0.1"]);
    assert_eq!(r.code, 2);
    let r = run(dir.path(), &["synthesize", "--system", &data("s1.json"), "--target", "2", "--epsilon=0"]);
    assert_eq!(r.code, 2);
}

#[test]
fn simulate_writes_left_and_right_values() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--system", &data("s1.json"), "--control", &data("s1_control.json"), "--x0", "1"];
    let r = run(dir.path(), &args[..]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["t", "side", "x_1"]);
    let at_impulse: Vec<_> = rows.iter().filter(|r| r[0] == "5.0000000000000000e-1").collect();
    assert_eq!(at_impulse.len(), 2);
    assert_eq!((at_impulse[0][1], at_impulse[0][2].parse::<f64>().unwrap()), ("L", 1.375));
    assert_eq!((at_impulse[1][1], at_impulse[1][2].parse::<f64>().unwrap()), ("R", 4.0625));
    assert!(rows[1..].iter().all(|r| r[0].contains('e') && r[0].split('e').next().unwrap().len() == 18));
}

#[test]
fn duality_and_adjoint_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let d = run(
        dir.path(),
        &["duality-check", "--system", &data("s1.json"), "--control", &data("s1_control.json"), "--x0", "1", "--phi", "2"],
    );
    assert_eq!(d.code, 0);
    assert!(d.json()["gap"].as_f64().unwrap().abs() < 1e-12);

    let a = run(dir.path(), &["adjoint", "--system", &data("s1.json"), "--phi", "[1]", "--samples", "3"]);
    assert_eq!(a.code, 0);
    assert_eq!(a.json()["psi_0"], serde_json::json!([1.5]));
}

#[test]
fn synthesize_reproduces_the_scalar_example() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["synthesize", "--system", &data("s1.json"), "--target", "[2]", "--epsilon", "0.01"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let j = r.json();
    assert!((j["phi_hat"][0].as_f64().unwrap() - 2.0 / 2.635).abs() < 1e-12);
    assert!(j["identity_residual"].as_f64().unwrap() < 1e-12);
    let control = fs::read_to_string(dir.path().join("control.csv")).unwrap();
    assert!(control.starts_with("t,u_1\n"));
    let impulses = fs::read_to_string(dir.path().join("impulses.csv")).unwrap();
    assert!(impulses.starts_with("k,t,v_1\n1,5.0000000000000000e-1,"));

    let s = run(dir.path(), &["synthesize", "--system", &data("s1.json"), "--target", "2", "--tolerance", "1e-6"]);
    assert_eq!(s.json()["schedule"]["stop"], "tolerance_met");
    assert!(s.json()["achieved_error"][0].as_f64().unwrap().abs() <= 1e-6);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let files = ["synthesis.json", "control.csv", "impulses.csv", "check.json"];
    let snapshot = || {
        let a = run(dir.path(), &["synthesize", "--system", &data("s1.json"), "--target", "2", "--epsilon", "1e-3"]);
        let b = run(dir.path(), &["--seed", "17", "check", "--system", &data("s2.json")]);
        let mut out = vec![a.stdout, b.stdout];
        out.extend(files.iter().map(|f| fs::read_to_string(dir.path().join(f)).unwrap()));
        out
    };
    assert_eq!(snapshot(), snapshot());
}

#[test]
fn wave_demo_writes_profile_and_control() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(
        dir.path(),
        &[
            "--quadrature-nodes",
            "256",
            "wave-demo",
            "--model",
            &data("w3.json"),
            "--target-coeffs",
            &data("w3_target.json"),
            "--epsilon",
            "1e-6",
        ],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let j = r.json();
    assert!((j["gamma_lambda_min"].as_f64().unwrap() - std::f64::consts::PI / 9.0).abs() < 1e-6);
    assert_eq!(j["n"], 6);
    let profile = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(profile.starts_with("t,theta,x\n"));
    assert_eq!(profile.lines().count(), 1 + 65 * 257);

    let two = run(
        dir.path(),
        &["wave-demo", "--model", &data("w3.json"), "--target-coeffs", &data("w3_target.json"), "--modes", "2"],
    );
    assert_eq!(two.code, 1, "target has three modes: {}", two.stderr);
}
