use std::path::PathBuf;
use std::process::{Command, Output};

use noether_core::fields::ScalarField;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noether")).args(args).output().unwrap()
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    dir.join(name)
}

#[test]
fn derive_reads_lagrangian_files() {
    for f in ["torsion.lagrangian", "helmholtz.lagrangian", "p_laplacian.lagrangian"] {
        let out = run(&["derive", "--lagrangian", &data(f)]);
        assert_eq!(out.status.code(), Some(0), "{f}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("result.identity.holds = true"), "{text}");
    }
}

#[test]
fn json_report_carries_config_and_status() {
    let out = run(&["check-h", "--lagrangian", "1/2*(z1^2 + z2^2) + u", "--mode", "per_index", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["command"], "check-h");
    assert_eq!(v["status"], "pass");
    assert_eq!(v["config"]["mode"], "per_index");
    assert_eq!(v["result"]["satisfied"], true);
}

#[test]
fn parse_errors_exit_with_usage_code() {
    let out = run(&["derive", "--lagrangian", "1/2*(z1^2 + "]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
    assert_eq!(run(&["solve", "--lagrangian", "u", "--bc", "0", "--grid", "4x4"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "nothing"]).status.code(), Some(2));
}

#[test]
fn support_touching_the_boundary_is_rejected() {
    let out = run(&["innervar", "--lagrangian", "1/2*(z1^2 + z2^2)", "--u", "x1", "--support", "0,0.5,0.2,0.8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_writes_report_and_field_files() {
    let report = scratch("solve.json");
    let field = scratch("solve.field");
    let out = run(&[
        "solve",
        "--lagrangian",
        &data("helmholtz.lagrangian"),
        "--bc",
        "exp(x1)",
        "--grid",
        "17x17",
        "--format",
        "json",
        "--out",
        report.to_str().unwrap(),
        "--field",
        field.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["result"]["solve"]["converged"], true);
    assert_eq!(v["result"]["plateau"]["has_interior_point"], false);
    let u = ScalarField::parse_text(&std::fs::read_to_string(&field).unwrap()).unwrap();
    let exact = ScalarField::from_fn(*u.grid(), |x, _| x.exp());
    assert!(u.max_abs_diff(&exact) < 1e-4);
}

#[test]
fn non_convergence_exits_with_numeric_code() {
    let out = run(&["solve", "--lagrangian", "1/2*(z1^2 + z2^2) + u^4", "--bc", "3", "--grid", "9x9", "--max-iter", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invert_with_custom_basis() {
    let out = run(&["invert", "--target", &data("alpha.tensor"), "--basis", "z1^2 + z2^2, u^2", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let c = &v["result"]["fit"]["coefficients"];
    assert!((c[0]["value"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    assert!((c[1]["value"].as_f64().unwrap() + 0.5).abs() < 1e-8);
    assert_eq!(v["result"]["verification"]["holds"], true);
}

#[test]
fn seed_changes_only_sampled_output() {
    let a = run(&["invert", "--target", &data("alpha.tensor"), "--format", "json", "--seed", "1"]);
    let b = run(&["invert", "--target", &data("alpha.tensor"), "--format", "json", "--seed", "2"]);
    let va: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let vb: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_ne!(va["config"]["seed"], vb["config"]["seed"]);
    assert_eq!(va["result"]["fit"]["feasible"], vb["result"]["fit"]["feasible"]);
}

#[test]
fn verify_suites_pass() {
    for s in ["counterexample", "plateau", "bridge"] {
        let out = run(&["verify", s]);
        assert_eq!(out.status.code(), Some(0), "{s}: {}", String::from_utf8_lossy(&out.stdout));
    }
}
