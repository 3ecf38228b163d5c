use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracsemi"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn check_passes_on_canonical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["check", "--config"])
        .arg(config("canonical.toml"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn invalid_nonlinearity_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("canonical.toml")).unwrap().replace("s = 0.4", "s = 0.6");
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, text).unwrap();
    let dir = tmp.path().join("out");
    let out = bin().args(["check", "--config"]).arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = std::fs::read_to_string(dir.join("error.json")).unwrap();
    assert!(err.contains("f3"), "{err}");
}

#[test]
fn missing_config_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["check", "--config"])
        .arg(tmp.path().join("absent.toml"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_command_is_rejected() {
    let out = bin().args(["frobnicate", "--config", "x.toml"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn sweep_then_report_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("canonical.toml"))
        .unwrap()
        .replace("eps = [0.5, 0.25, 0.125]", "eps = [0.5]");
    let cfg = tmp.path().join("small.toml");
    std::fs::write(&cfg, text).unwrap();
    let dir = tmp.path().join("out");
    let sweep = bin()
        .args(["sweep", "--workers", "2", "--seed", "3", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(sweep.status.code(), Some(0), "{}", String::from_utf8_lossy(&sweep.stderr));
    let first = std::fs::read(dir.join("summary.csv")).unwrap();
    let report = bin().args(["report", "--config"]).arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(report.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.join("summary.csv")).unwrap(), first);
    assert!(String::from_utf8_lossy(&report.stdout).contains("report: ok"));
}
