use std::path::Path;
use std::process::{Command, Output};

use innerfluc::io::{pert_to_file, read_csv, ModelFile};
use innerfluc::perturbation::{random_pert, PertElement};
use innerfluc::toy::{a_ev, ToyParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_innerfluc"))
        .args(args)
        .env_remove("INNERFLUC_MODEL")
        .env_remove("INNERFLUC_CONFIG")
        .env_remove("INNERFLUC_SEED")
        .env_remove("INNERFLUC_TOL")
        .env_remove("INNERFLUC_OUT")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn sorted(v: &Value) -> Vec<f64> {
    let mut x: Vec<f64> = v.as_array().unwrap().iter().map(|e| e.as_f64().unwrap()).collect();
    x.sort_by(f64::total_cmp);
    x
}

#[test]
fn check_toy_model() {
    let out = run(&["check"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["zeroth_order"]["passed"], true);
    assert_eq!(r["first_order_full"]["passed"], false);
    assert_eq!(r["first_order_subalgebras"]["A_F"]["passed"], true);
    assert_eq!(r["ko_signs"]["passed"], true);
    assert!(r["unmet_expectations"].as_array().unwrap().is_empty());
}

#[test]
fn check_with_vanishing_k_y() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", r#"{"k_y": [0.0, 0.0]}"#);
    let r = json(&run(&["check", "--config", &cfg]));
    assert_eq!(r["first_order_full"]["passed"], true);
}

#[test]
fn exported_model_checks_and_unmet_expectation_exits_1() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("toy.json");
    let out = run(&["export-toy", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(run(&["check", "--model", path.to_str().unwrap()]).status.code(), Some(0));

    let mut m: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    m["expect"]["first_order"] = Value::Bool(true);
    let wrong = write(&dir, "wrong.json", &m.to_string());
    let out = run(&["check", "--model", &wrong]);
    assert_eq!(out.status.code(), Some(1));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["unmet_expectations"][0], "first_order");
}

#[test]
fn malformed_input_exits_2_with_position() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", "{\n  \"algebra\": [\n");
    let out = run(&["check", "--model", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");

    let mut m: Value = serde_json::to_value(ModelFile::toy(&ToyParams::unit())).unwrap();
    m["D"][0][1] = serde_json::json!([3.0, 0.0]);
    let not_sa = write(&dir, "nsa.json", &m.to_string());
    let out = run(&["check", "--model", &not_sa]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("field `D`"));

    let cfg = write(&dir, "c.json", r#"{"f0": -1.0}"#);
    let out = run(&["hessian", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("f0"));

    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn fluctuate_unit_and_unitary() {
    let unit = json(&run(&["fluctuate"]));
    assert_eq!(unit["fields"]["x"], serde_json::json!([1.0, 0.0]));
    assert_eq!(unit["fields"]["v"], serde_json::json!([[1.0, 0.0], [0.0, 0.0]]));
    assert!(unit["fields"]["reconstruction_residual"].as_f64().unwrap() < 1e-12);

    let dir = TempDir::new().unwrap();
    let spec = a_ev();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = spec.random_unitary(&mut rng);
    let pu = PertElement::from_unitary(&spec, &u, 1e-9).unwrap();
    let path = write(&dir, "pu.json", &serde_json::to_string(&pert_to_file(&pu)).unwrap());
    let moved = json(&run(&["fluctuate", "--pert", &path]));
    for (a, b) in sorted(&unit["eigenvalues"]).iter().zip(sorted(&moved["eigenvalues"])) {
        assert!((a - b).abs() < 1e-9);
    }

    let p = random_pert(&spec, &mut rng, 3);
    let path = write(&dir, "p.json", &serde_json::to_string(&pert_to_file(&p)).unwrap());
    let r = json(&run(&["fluctuate", "--pert", &path]));
    assert!(r["fields"]["reconstruction_residual"].as_f64().unwrap() < 1e-9);
    assert!(r["self_adjointness_residual"].as_f64().unwrap() < 1e-12);

    let mut bad = pert_to_file(&p);
    bad.truncate(1);
    let path = write(&dir, "bad.json", &serde_json::to_string(&bad).unwrap());
    let out = run(&["fluctuate", "--pert", &path]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sigma_scan_minimum_near_vacuum() {
    let out = run(&["potential-scan"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("coord1,coord2,V\n") && !text.contains('\r'));
    let rows = read_csv(&text).unwrap();
    assert_eq!(rows.len(), 301 * 301);
    let step = 0.01;
    let radius = 2f64.powf(0.25);
    let best = rows.iter().min_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert!((((1.0 + best[0]).powi(2) + best[1].powi(2)).sqrt() - radius).abs() <= step * 1.5);
    let on_axis = rows
        .iter()
        .filter(|r| r[1].abs() < 1e-12 && r[0] > -1.0)
        .min_by(|a, b| a[2].total_cmp(&b[2]))
        .unwrap();
    assert!((on_axis[0] - (radius - 1.0)).abs() <= step);
}

#[test]
fn x_scan_minimum_on_circle() {
    let rows = read_csv(&String::from_utf8(run(&["potential-scan", "--slice", "x"]).stdout).unwrap()).unwrap();
    let best = rows.iter().min_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert!((best[0].hypot(best[1]) - 1.0).abs() <= 0.02);
}

#[test]
fn hessian_and_stabilizer_reports() {
    let h = json(&run(&["hessian"]));
    let diag: Vec<f64> = (0..3).map(|i| h["hessian"][i][i].as_f64().unwrap()).collect();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((diag[0] + 4.0 / pi2).abs() < 1e-4 * 4.0 / pi2);
    assert!((diag[1] - 16.0 * 2f64.sqrt() / pi2).abs() < 1e-4 * 2.3);
    assert!(diag[2].abs() < 1e-6);
    assert_eq!(h["classification"], "saddle");

    let s = json(&run(&["stabilizer"]));
    assert_eq!(s["zero"]["report"]["dim"], 6);
    assert_eq!(s["sigma_vev"]["report"]["dim"], 3);
    assert_eq!(s["full_vev"]["report"]["dim"], 2);
}

#[test]
fn minimize_reports_global_minimum() {
    let r = json(&run(&["minimize"]));
    let v = r["points"][0]["value"].as_f64().unwrap();
    let target = -4.0 / std::f64::consts::PI.powi(2);
    assert!((v - target).abs() < 1e-9);
    assert!(r["points"][0]["stabilizer_dim"].as_u64().is_some());
}

#[test]
fn morita_and_semigroup_pass() {
    let m = json(&run(&["morita-check", "--samples", "6"]));
    assert_eq!(m["passed"], true);
    assert_eq!(m["reports"].as_array().unwrap().len(), 6);
    let s = json(&run(&["semigroup-verify", "--samples", "5"]));
    assert!(s["transitivity"].as_f64().unwrap() < 1e-9);
}

#[test]
fn deterministic_and_env_overrides() {
    let a = run(&["semigroup-verify", "--samples", "3", "--seed", "9"]);
    let b = run(&["semigroup-verify", "--samples", "3", "--seed", "9"]);
    assert_eq!(a.stdout, b.stdout);
    let c = Command::new(env!("CARGO_BIN_EXE_innerfluc"))
        .args(["semigroup-verify", "--samples", "3"])
        .env("INNERFLUC_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(a.stdout, c.stdout);

    let dir = TempDir::new().unwrap();
    let out = dir.path().join("h.json");
    let status = Command::new(env!("CARGO_BIN_EXE_innerfluc"))
        .arg("hessian")
        .env("INNERFLUC_OUT", &out)
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(Path::new(&out).exists());
}
