//! The `curvlab` binary: exit codes, outputs and the catalog.

use std::path::Path;
use std::process::{Command, Output};

fn curvlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvlab")).args(args).current_dir(dir).output().unwrap()
}

fn scenario(dir: &Path, name: &str, body: &str) -> String {
    std::fs::write(dir.join(name), body).unwrap();
    name.to_owned()
}

const AREA: &str = "[metric]\nname = \"cone\"\nbeta = 0.3\n[experiment]\nkind = \"area\"\nradii = [0.3]\n";

#[test]
fn list_prints_the_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = curvlab(&["list"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["flat", "cone", "multicone", "hulin-troyanov", "abs-line", "torus-dipole"] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn passing_scenario_exits_zero_and_writes_both_reports() {
    let dir = tempfile::tempdir().unwrap();
    let f = scenario(dir.path(), "area.toml", &format!("{AREA}expect = 1.3\n"));
    let out = curvlab(&["run", &f, "--out", "out", "--grid", "128", "--stencil", "32"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/area.csv")).unwrap();
    let json = std::fs::read_to_string(dir.path().join("out/area.json")).unwrap();
    assert!(csv.starts_with("radius,area,ratio,bound,pass\n"));
    assert!(!csv.contains("generated") && json.contains("generated_unix"));
    let root = dir.path().canonicalize().unwrap();
    assert!(!json.contains(root.to_str().unwrap()) && !csv.contains(root.to_str().unwrap()));
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = scenario(dir.path(), "area.toml", &format!("{AREA}expect = 2.0\n"));
    let out = curvlab(&["run", &f, "--out", "out", "--grid", "64"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn config_errors_exit_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (AREA.replace("\"cone\"", "\"sphere\""), "metric"),
        (AREA.replace("radii", "radius"), "experiment"),
        (format!("{AREA}[grid]\nn = \"fine\"\n"), "grid.n"),
        (AREA.replace("beta = 0.3", "beta = -1.5"), "metric"),
        (AREA.replace("\"area\"", "\"teleport\""), "experiment"),
    ];
    for (i, (body, key)) in cases.iter().enumerate() {
        let f = scenario(dir.path(), &format!("bad{i}.toml"), body);
        let out = curvlab(&["run", &f, "--out", "out"], dir.path());
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "case {i}: {err}");
        assert!(err.contains(key), "case {i}: {err}");
    }
    let f = scenario(dir.path(), "ok.toml", AREA);
    let out = curvlab(&["run", &f, "--out", "out", "--stencil", "12"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--stencil"));
}

#[test]
fn threads_fall_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let f = scenario(dir.path(), "area.toml", AREA);
    let out = Command::new(env!("CARGO_BIN_EXE_curvlab"))
        .args(["run", &f, "--out", "out", "--grid", "64"])
        .env("CURVLAB_THREADS", "2")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let bad = Command::new(env!("CARGO_BIN_EXE_curvlab"))
        .args(["run", &f, "--out", "out"])
        .env("CURVLAB_THREADS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
