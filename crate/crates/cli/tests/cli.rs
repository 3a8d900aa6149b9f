//! Runs the `plap` binary end to end in temporary directories.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn plap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("PLAP_OUT_DIR")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn torsion_of_the_unit_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plap(tmp.path(), &["torsion", "--shape", "ball", "--R", "1", "--N", "2", "--p", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&tmp.path().join("torsion.report.json"));
    assert!((r["sup"].as_f64().unwrap() - 0.25).abs() <= 1e-3);
    assert!(stdout(&o).contains("sup = 0.2500000000"));
    let csv = fs::read_to_string(tmp.path().join("torsion.field.csv")).unwrap();
    // balls are discretized radially, so the field is a radial profile
    assert_eq!(csv.lines().next().unwrap(), "r,value");
    let m = json(&tmp.path().join("manifest.json"));
    assert_eq!(m["runs"]["torsion"]["exit_code"], 0);
    assert_eq!(m["runs"]["torsion"]["verdict"], "converged");
}

#[test]
fn thresholds_report_m_inf() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plap(tmp.path(), &["thresholds", "--resolution", "257"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&tmp.path().join("thresholds.report.json"));
    assert!((r["m_inf"].as_f64().unwrap() - 0.7358).abs() < 1e-4);
    // 17 significant digits in the file
    let text = fs::read_to_string(tmp.path().join("thresholds.report.json")).unwrap();
    assert!(text.contains("\"m_inf\": 7.3575888234288467e-1"), "{text}");
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# disk\ndomain.resolution = 129\nproblem.p = 3\n").unwrap();
    let o = plap(tmp.path(), &["eigen", "--config", cfg.to_str().unwrap(), "--p", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&tmp.path().join("eigen.report.json"))["p"].as_f64(), Some(4.0));
    let m = json(&tmp.path().join("manifest.json"));
    let echo = m["runs"]["eigen"]["config"].as_str().unwrap();
    assert!(echo.contains("problem.p = 4.0") && echo.contains("domain.resolution = 129"), "{echo}");
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["torsion", "--set", "problem.lamda=2"][..],
        &["torsion", "--p", "0.5"],
        &["torsion", "--shape", "torus"],
        &["solve", "--q", "12"],
        &["nonexist", "--beta", "1"],
        &["frobnicate"],
    ] {
        let o = plap(tmp.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_plap")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn non_convergence_exits_with_two_and_still_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plap(
        tmp.path(),
        &["solve", "--resolution", "129", "--m-fraction", "0.5", "--set", "fixed_point.max_outer_iters=1"],
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&tmp.path().join("solve.report.json"));
    assert_eq!(r["verdict"], "max_iters");
    assert_eq!(json(&tmp.path().join("manifest.json"))["runs"]["solve"]["exit_code"], 2);
}

#[test]
fn solve_converges_with_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plap(tmp.path(), &["solve", "--resolution", "257", "--m-fraction", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = json(&tmp.path().join("solve.report.json"));
    assert_eq!(r["verdict"], "converged");
    assert_eq!(r["energy_ok"], true);
    assert!(tmp.path().join("solve.field.csv").exists());
}

#[test]
fn bratu_probe_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let bratu = ["nonexist", "--p", "2", "--lambda", "0", "--beta", "0", "--q", "1", "--l", "1", "--resolution", "257"];
    for (m, verdict) in [("3", "unbounded-growth"), ("0.1", "stabilized")] {
        let mut args = bratu.to_vec();
        args.extend(["--m", m]);
        let o = plap(tmp.path(), &args);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(json(&tmp.path().join("nonexist.report.json"))["verdict"], verdict);
    }
}

#[test]
fn manifest_replays_byte_for_byte() {
    let first = tempfile::tempdir().unwrap();
    let o = plap(first.path(), &["region", "--resolution", "129", "--M", "0.8"]);
    assert_eq!(o.status.code(), Some(0));
    let o = plap(first.path(), &["torsion", "--resolution", "129", "--p", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let m = json(&first.path().join("manifest.json"));
    assert!(m["runs"]["region"].is_object() && m["runs"]["torsion"].is_object());

    // replay the region run from the echoed config
    let second = tempfile::tempdir().unwrap();
    let cfg = second.path().join("replay.cfg");
    fs::write(&cfg, m["runs"]["region"]["config"].as_str().unwrap()).unwrap();
    let o = plap(second.path(), &["region", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let a = fs::read(first.path().join("region.report.json")).unwrap();
    let b = fs::read(second.path().join("region.report.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn env_var_sets_the_output_dir_and_formats_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(["torsion", "--resolution", "65", "--formats", "json"])
        .env("PLAP_OUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("torsion.report.json").exists());
    assert!(!tmp.path().join("torsion.field.csv").exists());
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plap(tmp.path(), &["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(json(&tmp.path().join("selftest.report.json"))["all_pass"], true);
}

#[test]
fn sweep_writes_table_and_limits() {
    let tmp = tempfile::tempdir().unwrap();
    let o = plap(tmp.path(), &["sweep", "--resolution", "257", "--p-grid", "4,8,16"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(tmp.path().join("sweep.sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(tmp.path().join("sweep.p8.field.csv").exists());
    let r = json(&tmp.path().join("sweep.report.json"));
    assert!(r["limits"]["checks"].as_array().is_some_and(|c| !c.is_empty()));
}
