use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simovar"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn simovar(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &tempfile::TempDir, text: &str) -> PathBuf {
    let p = dir.path().join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn header(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .next()
        .unwrap_or_default()
        .to_string()
}

#[test]
fn analyze_intro_writes_report() {
    let out = simovar(&["analyze", config("intro.toml").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "sweep,quantity,omega,i,j,re,im");
    // Stacked covariance entry (3, 3) equals beta^2 = 0.36.
    let row = text.lines().find(|l| l.starts_with(",param_cov,,3,3,")).unwrap();
    let re: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    assert!((re - 0.36).abs() < 1e-12);
}

#[test]
fn optimize_reports_singular_direction() {
    let out = simovar(&["optimize", config("optimize.toml").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(header(&out), "quantity,index,value");
    let text = String::from_utf8(out.stdout).unwrap();
    let v1: Vec<f64> = text
        .lines()
        .filter(|l| l.starts_with("v1,"))
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(v1.len(), 2);
    assert!((v1[0] - 0.4472).abs() < 1e-3 && (v1[1] - 0.8944).abs() < 1e-3);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("fig2.csv");
    let out = simovar(&["reproduce", "fig2", "--out", dest.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dest).unwrap();
    assert!(text.starts_with("sweep,quantity,omega,i,j,re,im\n"));
    assert!(text.contains(",asvar_ar,"));
}

const SMALL_RUN: &str = r#"
seed = 11
samples = 200
runs = 40

[model]
orders = [1, 2]
theta = [[1.0], [0.5, -0.5]]

[noise]
form = "lower"
matrix = [[1.0, 0.0], [0.8, 0.6]]

[sweep]
parameter = "beta"
values = [0.3, 0.9]

[[statistic]]
kind = "param-var"
name = "t22"
module = 2
k = 2
"#;

#[test]
fn run_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, SMALL_RUN);
    let seq = simovar(&["run", cfg.to_str().unwrap(), "--jobs", "1"]);
    let par = simovar(&["run", cfg.to_str().unwrap(), "--jobs", "3"]);
    assert!(seq.status.success(), "{}", String::from_utf8_lossy(&seq.stderr));
    assert_eq!(header(&seq), "beta,t22_prediction,t22_sample,t22_stderr,excluded");
    assert_eq!(seq.stdout, par.stdout);
    let reseeded = simovar(&["run", cfg.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(seq.stdout, reseeded.stdout);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "[model]\norders = [1, 2]\nbogus = 1\n",
        "[model]\norders = [1, 2]\n[noise]\nform = \"covariance\"\nmatrix = [[1.0, 2.0], [2.0, 1.0]]\n",
        "[model]\norders = [1, 2]\n",
    ];
    for text in cases {
        let cfg = write_config(&dir, text);
        let out = simovar(&["analyze", cfg.to_str().unwrap()]);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{text}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let missing = simovar(&["analyze", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    let valid_pattern = simovar(&["optimize", config("intro.toml").to_str().unwrap()]);
    assert_eq!(valid_pattern.status.code(), Some(0));
    let cfg = write_config(
        &dir,
        "[model]\norders = [2, 2]\n[noise]\nform = \"lower\"\nmatrix = [[1.0, 0.0], [0.5, 1.0]]\n",
    );
    assert_eq!(simovar(&["optimize", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(
        simovar(&["run", config("intro.toml").to_str().unwrap(), "--runs", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        r#"
omega = [0.5]
[model]
orders = [1, 2]
basis = "tm"
poles = [0.9999999]
[input]
kind = "ar"
variance = 1.0
ar_poles = [0.9999999]
[noise]
form = "lower"
matrix = [[1.0, 0.0], [0.8, 0.6]]
"#,
    );
    let out = simovar(&["analyze", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numerical failure"));
}
