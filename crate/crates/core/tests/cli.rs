use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ac_thermo::driver::SystemState;
use ac_thermo::driver_io::{read_columns, write_field, write_snapshot, InitMode, RunConfig, SigmaSpec};
use ac_thermo::initial_data::synthesize;
use ac_thermo::{Grid, ModelParams, ScalarField};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ac-thermo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, cfg: &RunConfig) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    path
}

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::canonical();
    cfg.grid.n = 33;
    cfg.driver.dt = 1e-3;
    cfg.driver.t_init = 0.05;
    cfg.driver.horizon = 0.1;
    cfg.output.stride = 10;
    cfg
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_synthesized_data_passes_every_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &RunConfig::canonical());
    let out = bin(&["validate", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    assert_eq!(lines.len(), 8);
    assert!(lines.iter().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn canonical_run_writes_snapshots_manifest_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &RunConfig::canonical());
    let out = bin(&["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("status Converged"));
    let run = dir.path().join("run");
    assert!(run.join("manifest.toml").exists());
    assert!(run.join("config.toml").exists());
    let snaps = fs::read_dir(&run)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("t_"))
        .count();
    assert_eq!(snaps, 31);
    assert!(run.join("t_001200_0.300000.csv").exists());

    let rep = bin(&["report", run.to_str().unwrap()]);
    assert!(rep.status.success());
    let text = stdout(&rep);
    assert!(text.starts_with("status Converged"));
    assert_eq!(text.lines().filter(|l| l.starts_with("window ")).count(), 3);
}

#[test]
fn manifests_are_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    assert!(bin(&["run", cfg.to_str().unwrap()]).status.success());
    let first = fs::read_to_string(dir.path().join("run/manifest.toml")).unwrap();
    let snap = fs::read(dir.path().join("run/t_000100_0.100000.csv")).unwrap();
    assert!(bin(&["run", cfg.to_str().unwrap()]).status.success());
    assert_eq!(first, fs::read_to_string(dir.path().join("run/manifest.toml")).unwrap());
    assert_eq!(snap, fs::read(dir.path().join("run/t_000100_0.100000.csv")).unwrap());
}

#[test]
fn make_init_output_feeds_files_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let path = write_config(dir.path(), &cfg);
    let out = bin(&["make-init", path.to_str().unwrap()]);
    assert!(out.status.success());
    let init = dir.path().join("run/init.csv");
    assert!(init.exists());

    let mut files = cfg.clone();
    files.init.mode = InitMode::Files;
    files.init.rho0_file = Some("run/init.csv".into());
    files.output.dir = "run_files".into();
    let path = write_config(dir.path(), &files);
    assert!(bin(&["validate", path.to_str().unwrap()]).status.success());
    assert!(bin(&["run", path.to_str().unwrap()]).status.success());

    let a = fs::read(dir.path().join("run_files/t_000100_0.100000.csv")).unwrap();
    let path = write_config(dir.path(), &cfg);
    assert!(bin(&["run", path.to_str().unwrap()]).status.success());
    let b = fs::read(dir.path().join("run/t_000100_0.100000.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn oversized_xi_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let p = ModelParams::canonical();
    let grid = Grid::line(33).unwrap();
    let rho = ScalarField::from_fn(grid, |x, _| 0.4 + 0.1 * (std::f64::consts::PI * x).cos());
    let mut t = synthesize(&rho, 0.5, &p).unwrap();
    t.xi0 = rho.map(|r| 1.21 * (-2.0 - 2.0 * r).exp() / r);
    write_snapshot(&dir.path().join("bad.csv"), &SystemState::from_initial(&t), &p).unwrap();

    let mut cfg = small_config();
    cfg.init.mode = InitMode::Files;
    cfg.init.rho0_file = Some("bad.csv".into());
    let path = write_config(dir.path(), &cfg);
    let out = bin(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("necessary_condition"));
    assert!(!dir.path().join("run/manifest.toml").exists());
    let out = bin(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("FAIL necessary_condition"));
}

#[test]
fn sigma_from_file_matches_constant_source() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    write_field(&dir.path().join("sigma.csv"), &ScalarField::constant(Grid::line(33).unwrap(), 0.1)).unwrap();
    let mut from_file = cfg.clone();
    from_file.source.sigma_bar = SigmaSpec::File("sigma.csv".into());
    from_file.output.dir = "run_file".into();
    let a = write_config(dir.path(), &from_file);
    assert!(bin(&["run", a.to_str().unwrap()]).status.success());
    let b = write_config(dir.path(), &cfg);
    assert!(bin(&["run", b.to_str().unwrap()]).status.success());
    assert_eq!(
        fs::read(dir.path().join("run_file/t_000100_0.100000.csv")).unwrap(),
        fs::read(dir.path().join("run/t_000100_0.100000.csv")).unwrap()
    );
}

#[test]
fn bad_config_and_missing_files_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.toml");
    fs::write(&path, "[model]\nc0 = 1.0\n").unwrap();
    let out = bin(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
    assert_eq!(bin(&["report", dir.path().join("nope").to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn snapshot_round_trip_is_bit_exact_in_2d() {
    let dir = tempfile::tempdir().unwrap();
    let p = ModelParams::canonical();
    let grid = Grid::square(9).unwrap();
    let rho = ScalarField::from_fn(grid, |x, y| 0.45 + 0.1 * (3.0 * x).sin() * (2.0 * y).cos());
    let state = SystemState::from_initial(&synthesize(&rho, 0.37, &p).unwrap());
    let path = dir.path().join("s.csv");
    write_snapshot(&path, &state, &p).unwrap();
    let cols = read_columns(&path, grid).unwrap();
    assert_eq!(cols["rho"], state.rho);
    assert_eq!(cols["xi"], state.xi);
    assert_eq!(cols["theta"], state.theta);
    let header = fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("x,y,rho,xi,theta,mu,margin\n"));
}
