//! End-to-end runs of the `wolffpot` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn wolffpot(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wolffpot"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn report(out: &Path, cmd: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(format!("{cmd}.report.json"))).unwrap()).unwrap()
}

/// Rows of a CSV as string fields, header first.
fn csv_rows(out: &Path, cmd: &str) -> Vec<Vec<String>> {
    std::fs::read_to_string(out.join(format!("{cmd}.csv")))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn dirac_with_no_sigma_collapses_all_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = wolffpot(&["bilateral"], &configs().join("bilateral_dirac.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(dir.path(), "bilateral");
    assert_eq!(rows[0], ["x0", "x1", "x2", "lower", "upper", "v", "oracle", "flags"]);
    assert_eq!(rows.len(), 9);
    for row in &rows[1..] {
        let r: f64 = row[0].parse().unwrap();
        let (lo, hi, v, u): (f64, f64, f64, f64) =
            (row[3].parse().unwrap(), row[4].parse().unwrap(), row[5].parse().unwrap(), row[6].parse().unwrap());
        // with σ = 0 every bound is the Dirac Wolff potential 1/r
        for b in [lo, hi, v] {
            assert!((b - 1.0 / r).abs() <= 1e-9 / r, "{row:?}");
        }
        assert!((u - 1.0 / (4.0 * std::f64::consts::PI * r)).abs() <= 1e-6 * u, "{row:?}");
    }
    assert_eq!(report(dir.path(), "bilateral")["exit_code"], 0);
}

#[test]
fn divergent_carleson_constant_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = wolffpot(&["carleson"], &configs().join("carleson_atoms.json"), dir.path());
    assert_eq!(o.status.code(), Some(1));
    let rep = report(dir.path(), "carleson");
    assert_eq!(rep["passed"], false);
    assert!(rep["flags"].as_array().unwrap().iter().any(|f| f == "carleson_condition_divergent"));
}

#[test]
fn malformed_json_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\"n\": 3, \"p\": ");
    let o = wolffpot(&["potential"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn diagnostics_carry_the_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "typo.json",
        r#"{"n": 3, "p": 2.0, "omega": {"type": "dirac", "at": [0,0,0], "mass": 1}, "bilateral": {"c_lowr": 2}}"#,
    );
    let o = wolffpot(&["bilateral"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bilateral"), "{err}");

    let cfg = write(dir.path(), "p.json", r#"{"n": 3, "p": 3.5, "omega": {"type": "dirac", "at": [0,0,0], "mass": 1}}"#);
    let o = wolffpot(&["potential"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p"));
}

#[test]
fn random_points_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "r.json",
        r#"{"n": 3, "p": 2.0, "omega": {"type": "dirac", "at": [0,0,0], "mass": 1}, "points": {"random": {"count": 4, "radius": 1.0}}}"#,
    );
    let o = wolffpot(&["potential"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    let o = wolffpot(&["potential", "--seed", "3"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn command_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = wolffpot(&["gauge"], &configs().join("bilateral_dirac.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_run() {
    let expect = [
        ("potential", "potential_ball.json", 0),
        ("capacity", "capacity_eps_ball.json", 0),
        ("lowerbound", "lowerbound_ball.json", 0),
        ("gauge", "gauge_ball.json", 0),
        ("hessian", "hessian_dirac.json", 0),
    ];
    for (cmd, file, code) in expect {
        let dir = tempfile::tempdir().unwrap();
        let o = wolffpot(&[cmd], &configs().join(file), dir.path());
        assert_eq!(o.status.code(), Some(code), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(dir.path().join(format!("{cmd}.csv")).exists());
    }
}

#[test]
fn baseline_drift_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base.json");
    let cfg = configs().join("capacity_eps_ball.json");
    let first = wolffpot(&["capacity", "--baseline", base.to_str().unwrap()], &cfg, &dir.path().join("a"));
    assert_eq!(first.status.code(), Some(0));
    assert!(base.exists());
    let again = wolffpot(&["capacity", "--baseline", base.to_str().unwrap()], &cfg, &dir.path().join("b"));
    assert_eq!(again.status.code(), Some(0));
    // a tampered baseline trips the drift flag
    let text = std::fs::read_to_string(&base).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for e in v["entries"].as_object_mut().unwrap().values_mut() {
        let x = e["values"][0].as_f64().unwrap();
        e["values"][0] = serde_json::json!(x * 2.0);
    }
    std::fs::write(&base, serde_json::to_string(&v).unwrap()).unwrap();
    let drifted = wolffpot(&["capacity", "--baseline", base.to_str().unwrap()], &cfg, &dir.path().join("c"));
    assert_eq!(drifted.status.code(), Some(1));
    let rep = report(&dir.path().join("c"), "capacity");
    assert!(rep["flags"].as_array().unwrap().iter().any(|f| f.as_str().unwrap().starts_with("baseline_drift:")));
}
