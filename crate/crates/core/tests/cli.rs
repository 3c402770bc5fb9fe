use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lovelock"));
    c.env_remove("LOVELOCK_OUT_DIR");
    c
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn verify(path: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("verify")
        .arg(path)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const TOP_DEGREE: &str = r#"
name = "top-degree"
suite = "theorem2"
mbar = 2
signature = [0, 4]
thetas = ["c2"]
n-grid = 4

[[perturbations]]
kind = "general"
seed = 1
"#;

#[test]
fn flat_scenario_passes_and_writes_both_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = verify(&scenario("flat-m2"), dir.path(), &["--override", "n-grid=4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("flat-m2.json"));
    for key in ["suite", "scenario", "residuals", "tolerances", "pass", "seed", "version", "elapsed_ms"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["suite"], "theorem2");
    assert_eq!(report["pass"], true);
    assert_eq!(report["config"]["n-grid"], 4);
    let row = &report["residuals"][0];
    for key in ["elValue", "pairingValue", "relativeResidual", "thetaName", "kappa", "signature"] {
        assert!(row.get(key).is_some(), "row missing {key}");
    }
    let csv = fs::read_to_string(dir.path().join("flat-m2.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    for col in ["theta", "signature", "kappa", "elValue", "pairingValue", "relativeResidual"] {
        assert!(header.split(',').any(|h| h == col), "{header}");
    }
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn top_degree_theta_exits_one_citing_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "top.toml", TOP_DEGREE);
    let out = verify(&path, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("k < mbar"), "{err}");
}

#[test]
fn tolerance_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = verify(
        &scenario("pfaffian-m2-split"),
        dir.path(),
        &["--override", "tolerances.pointwise=1e-30", "--override", "points=3"],
    );
    assert_eq!(out.status.code(), Some(2));
    let report = json(&dir.path().join("pfaffian-m2-split.json"));
    assert_eq!(report["pass"], false);
    assert_eq!(report["residuals"].as_array().unwrap().len(), 3);
}

#[test]
fn failure_mid_run_exits_one_with_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = verify(
        &scenario("continuation-m2"),
        dir.path(),
        &["--override", "signature=[2, 2]", "--override", "n-grid=4"],
    );
    assert_eq!(out.status.code(), Some(1));
    let report = json(&dir.path().join("continuation-m2.json"));
    assert_eq!(report["pass"], false);
    assert!(report["error"].as_str().unwrap().contains("definite"), "{}", report["error"]);
}

#[test]
fn malformed_scenario_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.toml", "name = \"x\"\nsuite = \"theorem2\"\nmbar = \"two\"\n");
    let out = verify(&path, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mbar"));
    let missing = verify(&dir.path().join("absent.toml"), dir.path(), &[]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn output_directory_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("LOVELOCK_OUT_DIR", dir.path())
        .args(["verify", "--threads", "2"])
        .arg(scenario("pfaffian-m2-definite"))
        .args(["--override", "points=2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("pfaffian-m2-definite.json").exists());
    assert!(dir.path().join("pfaffian-m2-definite.csv").exists());
}

#[test]
fn convergence_command_fits_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("convergence")
        .arg(scenario("flat-m2"))
        .args(["--axis", "N", "--out"])
        .arg(dir.path())
        .args(["--override", "convergence.n-levels=[3, 4]"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("flat-m2-convergence-N.json"));
    assert_eq!(report["suite"], "convergence-N");
    let rows = report["residuals"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r["level"].is_number()));
}
