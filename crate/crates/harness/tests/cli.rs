use std::path::Path;
use std::process::{Command, Output};

use fvlab_harness::Scenario;

fn fvlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fvlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn lists_every_scenario() {
    let out = fvlab(&["--list-scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for s in Scenario::ALL {
        assert!(text.lines().any(|l| l.starts_with(s.name())), "{} missing", s.name());
    }
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "unknown.toml", "[experiment]\nscenario = \"nope\"\n");
    let out = fvlab(&["run", &unknown]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2, column 12"), "{err}");

    let extra = write_config(dir.path(), "extra.toml", "[experiment]\nscenario = \"constant-1d\"\ncolor = 3\n");
    assert_eq!(fvlab(&["run", &extra]).status.code(), Some(1));
    let missing = dir.path().join("absent.toml");
    assert_eq!(fvlab(&["run", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn solver_faults_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "negative.toml",
        "[experiment]\nscenario = \"constant-1d\"\n[data]\ninitial = { preset = \"constant\", value = -1.0 }\n",
    );
    let out_dir = dir.path().join("out");
    let out = fvlab(&["run", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.join("summary.csv").exists());
}

#[test]
fn run_writes_seeded_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "constant.toml", "[experiment]\nscenario = \"constant-1d\"\nseed = 3\n");
    let out_dir = dir.path().join("out");
    let out = fvlab(&["run", &config, "--out", out_dir.to_str().unwrap(), "--seed", "17"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in fvlab_harness::run::FILES {
        let text = std::fs::read_to_string(out_dir.join(file)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,id,quantity,value"));
        assert_eq!(lines.next(), Some("0.0,run,seed,17.0"), "{file}");
    }
}
