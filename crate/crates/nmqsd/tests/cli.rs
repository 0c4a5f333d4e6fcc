use std::path::Path;
use std::process::Command;

use serde_json::Value;

const NOISE: &str = r#"
[kernel]
family = "ou"
kappa = 1.0
gamma = 2.0

[grid]
t_max = 1.0
dt = 0.1

[ensemble]
n_traj = 3
seed = 7
"#;

const COMPAT: &str = r#"
[kernel]
family = "ou"
kappa = 1.0
gamma = 1.0

[model]
kind = "dephasing"
omega = 1.0
r = 1.0
kappa = 1.0
initial_state = "plus"

[grid]
t_max = 2.0
dt = 0.01

[ensemble]
n_traj = 0
seed = 3

[compat]
s = 1.0
t = 2.0
n_cond = 500
re_z_s = 0.0
"#;

fn nmqsd(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nmqsd")).args(args).current_dir(dir).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn noise_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "noise.toml", NOISE);
    for out in ["a", "b"] {
        let o = nmqsd(&["noise", "--config", "noise.toml", "--out", out], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(tmp.path().join("a/noise.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/noise.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("path_id,t,re,im\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 11);
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "noise.toml", NOISE);
    nmqsd(&["noise", "--config", "noise.toml", "--out", "a"], tmp.path());
    nmqsd(&["noise", "--config", "noise.toml", "--out", "b", "--seed", "8"], tmp.path());
    let a = std::fs::read(tmp.path().join("a/noise.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/noise.csv")).unwrap();
    assert_ne!(a, b);
    let manifest: Value = serde_json::from_slice(&std::fs::read(tmp.path().join("b/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 8);
    assert_eq!(manifest["status"], "ok");
}

#[test]
fn empty_ensemble_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = NOISE.replace("n_traj = 3", "n_traj = 0");
    write(tmp.path(), "bad.toml", &format!("{bad}\n{}", &COMPAT[COMPAT.find("[model]").unwrap()..COMPAT.find("[grid]").unwrap()]));
    let o = nmqsd(&["unravel", "--config", "bad.toml", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ensemble.n_traj"));
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "typo.toml", &NOISE.replace("gamma = 2.0", "gama = 2.0"));
    let o = nmqsd(&["noise", "--config", "typo.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gama"));
}

#[test]
fn compat_manifest_carries_the_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "compat.toml", COMPAT);
    let o = nmqsd(&["compat", "--config", "compat.toml", "--out", "o"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value = serde_json::from_slice(&std::fs::read(tmp.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["task"], "compat");
    let closed = manifest["summary"]["closed_form"].as_array().unwrap();
    for v in closed {
        assert!((v.as_f64().unwrap() - 0.5493).abs() < 5e-4);
    }
    assert!(tmp.path().join("o/compat.json").exists());
}
