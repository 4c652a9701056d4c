//! End-to-end runs of the `cxyz` binary.

use std::path::Path;
use std::process::{Command, Output};

use cavity_xyz::io::scenario::{couplings_report, fixed_points_report, CouplingsReport, FixedPointsReport};
use cavity_xyz::io::parse_config;

fn cxyz(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cxyz"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"preset": "stability", "atoms": {"n": 40}, "model": {"backend": "exact"},
            "sequence": {"mode": "sequence-emulated", "projection_shots": 50}, "scan": {"resolution": 4}}"#,
    );
    let run = |out: &str| {
        let target = dir.path().join(out);
        ok(cxyz(&["--config", &cfg, "--seed", "11", "--out", target.to_str().unwrap(), "flowmap"], &[]));
        let mut files: Vec<_> = std::fs::read_dir(&target).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        files.iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>()
    };
    let (a, b) = (run("a"), run("b"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn couplings_report_round_trips() {
    let stdout = ok(cxyz(&["couplings"], &[]));
    let parsed: CouplingsReport = serde_json::from_str(&stdout).unwrap();
    let direct = couplings_report(&parse_config("").unwrap()).unwrap();
    assert_eq!(parsed, direct);
}

#[test]
fn fixed_point_census_for_tact() {
    let dir = tempfile::tempdir().unwrap();
    ok(cxyz(&["--out", dir.path().to_str().unwrap(), "scenario", "fig2-tact"], &[]));
    let text = std::fs::read_to_string(dir.path().join("fig2_tact_fixed_points.json")).unwrap();
    let report: FixedPointsReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.counts.stable_center, 4);
    assert_eq!(report.counts.saddle, 2);
    let cfg = parse_config(r#"{"preset": "fig2-tact"}"#).unwrap();
    let spec = cfg.eom_spec().unwrap();
    assert_eq!(report, fixed_points_report(&spec, cfg.n_atoms, &cfg).unwrap());
}

#[test]
fn saddle_window_table_has_full_grid() {
    let stdout = ok(cxyz(&["scenario", "fig3-saddle"], &[]));
    let csv = stdout.split("==> fig3_saddle.csv <==\n").nth(1).unwrap();
    let csv = csv.split("==>").next().unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# units:"));
    assert_eq!(lines.next().unwrap(), "theta_i,phi_i,jx_i,jy_i,jz_i,tx,ty,tz,dtheta,dphi");
    let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), 121);
    for row in rows {
        assert_eq!(row.split(',').count(), 10);
        assert!(row.split(',').all(|c| c.parse::<f64>().unwrap().is_finite()));
    }
}

#[test]
fn unknown_key_is_rejected_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"cavity": {"kapa_hz": 56e3}}"#);
    let out = cxyz(&["--config", &cfg, "couplings"], &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cavity.kapa_hz"));
}

#[test]
fn negative_linewidth_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "neg.json", r#"{"cavity": {"kappa_hz": -1}}"#);
    let out = cxyz(&["--config", &cfg, "couplings"], &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cavity.kappa_hz"));
}

#[test]
fn environment_overrides_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", r#"{"cavity": {"kappa_hz": 56e3}}"#);
    let stdout = ok(cxyz(&["--config", &cfg, "couplings"], &[("CXYZ_CAVITY__KAPPA_HZ", "60e3")]));
    let report: CouplingsReport = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report.cavity.kappa, 2.0 * std::f64::consts::PI * 60e3);
}

#[test]
fn unknown_scenario_fails() {
    let out = cxyz(&["scenario", "fig9"], &[]);
    assert!(!out.status.success());
}
