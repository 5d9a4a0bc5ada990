use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffusim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_kind(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"]["kind"].as_str().unwrap().to_owned()
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 4\n[model]\nlambda = 3.0\nalpha = 0.5\n[lattice]\nside = 12\n[run]\nhorizon = 2.0\n",
    )
    .unwrap();
    let out = run(
        &["--config", cfg.to_str().unwrap(), "--alpha", "2", "simulate"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let config = &json(&dir.path().join("summary.json"))["config"];
    assert_eq!(config["seed"], 4);
    assert_eq!(config["model"]["lambda"], 3.0);
    assert_eq!(config["model"]["alpha"], 2.0);
    assert_eq!(config["lattice"]["side"], 12);
    assert_eq!(config["run"]["horizon"], 2.0);
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_kind(&out), "config");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\n[model]\nlamda = 2.0\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "simulate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = run(&["--seed", "1", "bass"], &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_kind(&out), "runtime");
}

#[test]
fn couple_reports_zero_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["--seed", "8", "--side", "20", "--lambda", "2", "couple", "--seeds", "30", "--horizon", "5"],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("violations: 0"));
    let csv = std::fs::read_to_string(dir.path().join("couple.csv")).unwrap();
    assert!(csv.starts_with("# config: "));
    assert_eq!(csv.lines().count(), 32);
}

#[test]
fn pure_death_raster_only_loses_adopters() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "--seed", "2", "--side", "9", "--lambda", "0", "--alpha", "0", "simulate", "--initial", "all-adopter",
            "--horizon", "4", "--time-step", "1",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("raster.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 9);
    for row in rows {
        let cells: Vec<u8> = row.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 5);
        assert_eq!(cells[0], 2);
        // once a site forgets it never hears again
        let first_zero = cells.iter().position(|&c| c == 0).unwrap_or(cells.len());
        assert!(cells[..first_zero].iter().all(|&c| c == 2));
        assert!(cells[first_zero..].iter().all(|&c| c == 0));
    }
    let pgm = std::fs::read(dir.path().join("raster.pgm")).unwrap();
    assert!(pgm.starts_with(b"P"));
}

#[test]
fn oracle_rows_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["--seed", "1", "--side", "3", "oracle", "--initial", "single-aware-origin", "--times", "0.7"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    let total: f64 = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9, "{total}");
}
