use std::fs;
use std::process::Command;

fn prism() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prism"))
}

#[test]
fn verify_passes_and_prints_json() {
    let out = prism().arg("verify").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"env":"mirrorchain","variant":"prizm","seeds":[0]}"#).unwrap();
    let out = prism().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("config-invalid-enum") && err.contains("prism"), "{err}");

    let missing = prism().args(["run", "--config", "/nonexistent/x.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn run_writes_metrics_and_front() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(
        &path,
        r#"{"env":"mirrorchain","variant":"oracle","seeds":[0],"budget":{"steps_per_cycle":80}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = prism()
        .args(["run", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("metrics.csv").exists());
    assert!(out_dir.join("pareto_oracle_0.csv").exists());
}
