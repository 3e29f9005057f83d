use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coadjoint::kolmogorov::DensityGrid;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coadjoint"))
        .args(args)
        .env_remove("COADJOINT_THREADS")
        .output()
        .expect("spawn coadjoint")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_scenario(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("scenario.json");
    fs::write(&p, body).unwrap();
    p
}

const RIGID_BODY: &str = r#"{
  "schema_version": 1,
  "system": "lie_poisson",
  "algebra": "so3",
  "kinetic": { "G": [[1, 0, 0], [0, 2, 0], [0, 0, 3]] },
  "xi": [[0.5, 0, 0], [0, 0.3, 0]],
  "m0": [0.6, 0.7, 0.4],
  "T": 0.2,
  "M": 64,
  "seed": 3
}"#;

#[test]
fn simulate_writes_every_step_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), RIGID_BODY);
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let o = run(&["simulate", path_str(&sc), "--out", path_str(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push((fs::read(out.join("trajectory.csv")).unwrap(), fs::read(out.join("trajectory.json")).unwrap()));
    }
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 65, "header plus M + 1 rows");
    assert_eq!(outputs[0], outputs[1]);
    let meta: serde_json::Value = serde_json::from_slice(&outputs[0].1).unwrap();
    assert_eq!(meta["seed"], 3);
    assert!(meta["diverged_at"].is_null());
}

#[test]
fn non_positive_kinetic_matrix_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), &RIGID_BODY.replace("[0, 0, 3]", "[0, 0, -3]"));
    let o = run(&["simulate", path_str(&sc), "--out", path_str(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kinetic.G"), "{}", stderr(&o));
}

#[test]
fn unknown_field_reports_its_position() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), &RIGID_BODY.replace("\"seed\": 3", "\"seed\": 3,\n  \"sede\": 4"));
    let o = run(&["simulate", path_str(&sc), "--out", path_str(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("sede") && err.contains("line 11"), "{err}");
}

#[test]
fn divergence_exits_two_and_keeps_the_partial_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", path_str(&scenario("diverging.json")), "--out", path_str(dir.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("diverging.json")).unwrap()).unwrap();
    assert!(meta["diverged_at"]["step"].is_u64(), "{meta}");
    assert!(dir.path().join("diverging.csv").exists());
}

#[test]
fn validate_exit_codes() {
    let o = run(&["validate", "algebra"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("(pass)"));
    assert_eq!(run(&["validate", "nonsense"]).status.code(), Some(1));
}

#[test]
fn invalid_thread_count_is_an_input_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_coadjoint"))
        .args(["validate", "algebra"])
        .env("COADJOINT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("COADJOINT_THREADS"));
}

fn kolmogorov(f0: &str, out: &Path, extra: &[&str]) -> Output {
    let sc = scenario("rigid_body_kolmogorov.json");
    let mut args = vec!["kolmogorov", path_str(&sc), "--f0", f0, "--grid", "32", "--paths", "4000", "--out", path_str(out)];
    args.extend_from_slice(extra);
    run(&args)
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(out.join("crosscheck.json")).unwrap()).unwrap()
}

#[test]
fn kolmogorov_casimir_is_conserved() {
    let dir = tempfile::tempdir().unwrap();
    let o = kolmogorov("casimir", dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(report(dir.path())["verdict"], "conserved");
    for name in ["density.bin", "slice_m1.csv", "slice_m2.csv", "slice_m3.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn kolmogorov_constant_stays_constant() {
    let dir = tempfile::tempdir().unwrap();
    let o = kolmogorov("const:1.5", dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(report(dir.path())["verdict"], "conserved");
    let grid = DensityGrid::read_from(&fs::read(dir.path().join("density.bin")).unwrap()[..]).unwrap();
    assert!(grid.values.iter().all(|v| (v - 1.5).abs() <= 1e-12));
}

#[test]
fn kolmogorov_coordinate_agrees_with_monte_carlo() {
    let dir = tempfile::tempdir().unwrap();
    let o = kolmogorov("m1", dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = report(dir.path());
    assert_eq!(rep["verdict"], "agree", "{rep}");
    assert!(rep["gap"].as_f64().unwrap() <= rep["tolerance"].as_f64().unwrap());
}

#[test]
fn kolmogorov_rejects_unstable_steps() {
    let dir = tempfile::tempdir().unwrap();
    let o = kolmogorov("m1", dir.path(), &["--dt", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("admissible dt"), "{}", stderr(&o));
}
