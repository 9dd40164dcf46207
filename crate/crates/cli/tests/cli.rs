use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn helmls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helmls")).args(args).env("RUST_LOG", "warn").output().expect("spawn helmls")
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_all_artifacts() {
    let dir = scratch_dir("run2");
    let out = helmls(&["run", "--example", "2", "--levels", "2", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "convergence.csv",
        "iterations.csv",
        "level0_u.csv",
        "level0_u.vtk",
        "level1_u.csv",
        "level1_u.vtk",
        "fronts.csv",
        "shocks_exact.csv",
        "shocks_exact.vtk",
        "summary.json",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let conv = fs::read_to_string(dir.join("convergence.csv")).unwrap();
    let mut lines = conv.lines();
    assert_eq!(lines.next(), Some("level,h,l2sq,l2sq_rate,l1sq,l1sq_rate,Mh,dMh,iters"));
    assert_eq!(lines.count(), 2);
    let s = summary(&dir);
    let levels = s["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 2);
    assert_eq!(levels[0]["h"], 0.0625);
    assert!(levels[1]["l2sq"].as_f64().unwrap() < levels[0]["l2sq"].as_f64().unwrap());
    assert!(levels[0]["hminus1_residual"].as_f64().unwrap() > 0.0);
    assert_eq!(s["metrics"]["contraction"].as_array().unwrap().len(), 1);
    let grid = fs::read_to_string(dir.join("level1_u.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 33 * 65);
    let vtk = fs::read_to_string(dir.join("level0_u.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0"));
    assert!(vtk.contains("DIMENSIONS 17 33 1"));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (scratch_dir("det_a"), scratch_dir("det_b"));
    for d in [&a, &b] {
        let out = helmls(&["run", "--example", "1", "--levels", "2", "--out", d.to_str().unwrap()]);
        assert!(out.status.success());
    }
    for f in ["convergence.csv", "iterations.csv", "level1_u.csv", "fronts.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch_dir("cfg");
    fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "# manufactured problem\nexample = manufactured\nlevels = 3\ngrid = 8\n").unwrap();
    let out_dir = dir.join("out");
    let out = helmls(&["run", "--config", cfg.to_str().unwrap(), "--levels", "1", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out_dir);
    assert_eq!(s["config"]["example"], "manufactured");
    assert_eq!(s["levels"].as_array().unwrap().len(), 1);
    assert_eq!(fs::read_to_string(out_dir.join("level0_u.csv")).unwrap().lines().count(), 1 + 9 * 17);
    assert!(!out_dir.join("shocks_exact.csv").exists());
}

#[test]
fn invalid_input_fails_with_diagnostic() {
    let dir = scratch_dir("bad");
    for args in [
        vec!["run", "--levels", "0"],
        vec!["run", "--example", "4"],
        vec!["run", "--order-v", "3"],
        vec!["run", "--config", "/nonexistent/run.cfg"],
    ] {
        let mut a = args.clone();
        a.extend(["--out", dir.to_str().unwrap()]);
        let out = helmls(&a);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty());
    }
    let cfg = dir.with_extension("cfg");
    fs::write(&cfg, "levels = 2\ncolour = red\n").unwrap();
    let out = helmls(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));
}

#[test]
fn oracle_and_mesh_subcommands() {
    let dir = scratch_dir("oracle");
    let out = helmls(&["oracle", "--example", "3", "--nt", "16", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.join("exact_u.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 17 * 33);
    let first: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[2].parse::<f64>().unwrap(), 3.0);
    let shocks = fs::read_to_string(dir.join("shocks_exact.csv")).unwrap();
    let curves: std::collections::BTreeSet<&str> =
        shocks.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(curves.len(), 3);

    let mesh = dir.join("mesh.vtk");
    let out = helmls(&["mesh", "--level", "1", "--out", mesh.to_str().unwrap()]);
    assert!(out.status.success());
    let vtk = fs::read_to_string(&mesh).unwrap();
    assert!(vtk.contains("POINTS 2145 double"));
    assert!(vtk.contains("CELLS 4096 16384"));
    assert!(vtk.contains("SCALARS inflow double 1"));
}
