//! Black-box tests of the `levyldp` binary: config handling, exit codes,
//! and reproducibility of the written artifacts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levyldp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SCALAR_SYSTEM: &str = r#""system": {
    "generator": {"kind": "diagonal", "eigenvalues": [-1.0]},
    "drift": {"kind": "zero"},
    "diffusion": {"sigma": 1.0, "modulation": {"kind": "additive"},
                  "cells": [{"weight": 1.0, "direction": [1.0]}]},
    "marks": [{"label": "unit", "mass": 1.0}]
  }"#;

fn scalar_config(action: &str) -> String {
    format!(
        r#"{{
  {SCALAR_SYSTEM},
  "solver": {{"grid": {{"T": 1.0, "n_steps": 64}}}},
  "seed": 9,
  "action": {{{action}}}
}}"#
    )
}

#[test]
fn list_examples_is_lexicographic_and_complete() {
    let out = run(&["list-examples"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let names: Vec<&str> = text
        .lines()
        .filter_map(|l| l.split_whitespace().next())
        .collect();
    assert_eq!(names, ["heat1d-dirichlet", "scalar-additive"]);
}

#[test]
fn bundled_example_runs_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--config",
        "scalar-additive",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let paths = fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    assert_eq!(paths.lines().count(), 5);
    assert!(paths.starts_with("path,seed,c0,"));
    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"config_source\": \"bundled:scalar-additive\""));
    assert!(manifest.contains("\"command\": \"simulate\""));
}

#[test]
fn unknown_config_keys_exit_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = scalar_config(r#""simulate": {"epsilon": 0.2, "n_paths": 1, "burnin": 5}"#);
    fs::write(&path, text).unwrap();
    let out = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("burnin"), "stderr: {err}");
    assert!(err.contains("line"), "stderr: {err}");
}

#[test]
fn subcommand_must_match_the_action_section() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.json");
    fs::write(
        &path,
        scalar_config(r#""simulate": {"epsilon": 0.2, "n_paths": 1}"#),
    )
    .unwrap();
    let out = run(&["skeleton", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("simulate"));
}

#[test]
fn missing_config_points_at_the_example_list() {
    let out = run(&["simulate", "--config", "nope.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("list-examples"));
}

#[test]
fn injected_nonmonotone_drift_fails_validation_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("validate.json");
    let text = scalar_config(r#""validate": {}"#)
        .replace(r#"{"kind": "zero"}"#, r#"{"kind": "linear", "slope": 1.0}"#);
    fs::write(&path, text).unwrap();
    let out = run(&[
        "validate",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let log = stdout(&out);
    assert!(log.contains("drift-semimonotone"));
    assert!(log.contains("FAIL"));
    let report = fs::read_to_string(dir.path().join("o/validation.json")).unwrap();
    assert!(report.contains("\"overall_pass\": false"));
}

fn dir_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

fn manifest_without_timestamp(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("timestamp_unix_s"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn reruns_are_byte_identical_and_schedule_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(
        &cfg,
        scalar_config(r#""simulate": {"epsilon": 0.15, "n_paths": 6}"#),
    )
    .unwrap();
    let outs = ["a", "b", "c"].map(|n| dir.path().join(n));
    for (out, jobs) in outs.iter().zip(["1", "1", "3"]) {
        let res = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "42",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
            "--dump-path",
            "--dump-points",
        ]);
        assert!(res.status.success(), "stderr: {}", stderr(&res));
    }
    let names = dir_files(&outs[0]);
    assert_eq!(names, dir_files(&outs[1]));
    assert_eq!(names, dir_files(&outs[2]));
    assert!(names.contains(&"path_005.csv".to_string()));
    for name in &names {
        if name == "manifest.json" {
            assert_eq!(
                manifest_without_timestamp(&outs[0].join(name)),
                manifest_without_timestamp(&outs[1].join(name))
            );
            continue;
        }
        let a = fs::read(outs[0].join(name)).unwrap();
        assert_eq!(a, fs::read(outs[1].join(name)).unwrap(), "rerun differs in {name}");
        assert_eq!(a, fs::read(outs[2].join(name)).unwrap(), "jobs change differs in {name}");
    }
}

#[test]
fn seed_override_changes_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(
        &cfg,
        scalar_config(r#""simulate": {"epsilon": 0.15, "n_paths": 2}"#),
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, seed) in [(&a, "1"), (&b, "2")] {
        let res = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success());
    }
    assert_ne!(
        fs::read(a.join("paths.csv")).unwrap(),
        fs::read(b.join("paths.csv")).unwrap()
    );
}

#[test]
fn skeleton_example_reproduces_and_reports_its_cost() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let res = run(&[
            "skeleton",
            "--config",
            "heat1d-dirichlet",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "stderr: {}", stderr(&res));
    }
    assert_eq!(
        fs::read(a.join("skeleton.csv")).unwrap(),
        fs::read(b.join("skeleton.csv")).unwrap()
    );
    let summary = fs::read_to_string(a.join("skeleton.json")).unwrap();
    // g = 2 on total mass 1.5 over half a unit of time.
    assert!(summary.contains("\"control_cost\": 0.28972077083991804"));
    assert!(summary.contains("\"within_apriori_bound\": true"));
}
