//! End-to-end behaviour of the `kglab` binary: exit codes, artifacts, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kglab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kglab"));
    c.env_remove("KGLAB_OUTPUT");
    c
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kglab_cli_{}_{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], dir: &Path) -> Output {
    kglab().args(args).arg("--output").arg(dir).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn cfl_violation_exits_2() {
    let dir = scratch("cfl");
    let cfg = write_config(&dir, "[time]\ndt = 0.06\n");
    let out = run(&["spectrum", "--config", cfg.to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CFL"));
}

#[test]
fn unknown_key_exits_2() {
    let dir = scratch("unknown");
    let cfg = write_config(&dir, "[shoot]\nhorizon = 30\nbisect_harder = true\n");
    let out = run(&["spectrum", "--config", cfg.to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bisect_harder"));
}

#[test]
fn spectrum_and_scattering_artifacts_are_deterministic() {
    let a = scratch("det_a");
    let b = scratch("det_b");
    for dir in [&a, &b] {
        for cmd in ["spectrum", "scattering"] {
            let out = run(&[cmd, "--check"], dir);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        }
    }
    for f in ["spectrum.csv", "scattering.csv", "genericity.json", "spectrum.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("index,eigenvalue,parity\n0,-5.25"));
    let header = std::fs::read_to_string(a.join("scattering.csv")).unwrap();
    assert!(header.starts_with("k,ReT,ImT,ReR+,ImR+,ReR-,ImR-,unitarity_defect\n"));
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("genericity.json")).unwrap()).unwrap();
    assert_eq!(verdict["genericity"]["verdict"], "Generic");
}

#[test]
fn manifest_reproduces_a_run() {
    let a = scratch("man_a");
    let cfg = write_config(&a, "seed = 7\n[grid]\nL = 30\n");
    assert!(run(&["spectrum", "--config", cfg.to_str().unwrap()], &a).status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["stages"][0]["wall_seconds"].is_number());
    let b = scratch("man_b");
    let m = a.join("manifest.json");
    assert!(run(&["spectrum", "--config", m.to_str().unwrap()], &b).status.success());
    let again: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], again["config_hash"]);
    assert_eq!(std::fs::read(a.join("spectrum.csv")).unwrap(), std::fs::read(b.join("spectrum.csv")).unwrap());
}

#[test]
fn output_directory_from_environment() {
    let dir = scratch("env");
    let out = kglab().arg("spectrum").env("KGLAB_OUTPUT", &dir).output().unwrap();
    assert!(out.status.success());
    assert!(dir.join("spectrum.csv").exists());
}

#[test]
fn forced_offset_without_tracking_exits_4() {
    let dir = scratch("escape");
    let cfg = write_config(&dir, "[time]\nT = 40\n[shoot]\nhorizon = 30\ns_offset = 0.1\ntrack = false\n[fit]\nt2 = 30\n");
    let out = run(&["evolve", "--config", cfg.to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stable manifold"));
    let traj = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,a,adot,chi_sup,chi_weighted_sup,energy,F_v\n"));
    assert!(dir.join("shoot.json").exists());
}
