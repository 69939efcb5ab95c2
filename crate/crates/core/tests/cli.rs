use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polymelt"))
}

fn write_config(dir: &std::path::Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = r#"
[grids]
n = 8
n_t = 10
t_max = 0.2
n_s = 8

[polymer]
quadrature_nodes = 16

[scenario]
t_end = 0.1
"#;

#[test]
fn validate_reports_and_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let ok = bin().arg("validate").arg(&cfg).output().unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("[pass] lockstep"));
    let bad = bin().arg("validate").arg(&cfg).args(["--set", "polymer.gamma=2.0"]).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stdout).contains("[FAIL] det_floor"));
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let st = bin()
        .arg("run")
        .arg(&cfg)
        .args(["--quiet", "--set"])
        .arg(format!("output.dir=\"{}\"", out.display()))
        .status()
        .unwrap();
    assert!(st.success());
    assert!(out.join("timeseries.csv").exists() && out.join("manifest.json").exists());
}

#[test]
fn oracle_tables() {
    let out = bin().args(["oracle", "cauchy"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 101);
    let worst = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8);
    assert!(bin().args(["oracle", "no-such-table"]).output().unwrap().status.code() != Some(0));
}

#[test]
fn convergence_prints_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = bin().arg("convergence").arg(&cfg).args(["--levels", "3"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("det drift order") && text.contains("velocity order"));
}
