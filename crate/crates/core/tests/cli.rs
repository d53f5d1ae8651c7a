use std::path::{Path, PathBuf};
use std::process::Command;

fn nss() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nss"))
}

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn short_smooth(dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(bundled("smooth.conf")).unwrap();
    let path = dir.join("short.conf");
    std::fs::write(&path, format!("{text}\nrun.max_steps = 20\nrun.snapshot_every = 10\n")).unwrap();
    path
}

#[test]
fn run_writes_outputs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_smooth(dir.path());
    let mut csv = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = nss().arg("run").arg(&cfg).arg("--output-dir").arg(&out).status().unwrap();
        assert!(status.success());
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["exit_status"], "ok");
        assert_eq!(manifest["grid"]["nx"], 64);
        assert!(out.join("snapshots/rho_000010.bin").exists());
        csv.push(std::fs::read(out.join("diagnostics.csv")).unwrap());
    }
    assert_eq!(csv[0], csv[1]);
    let text = String::from_utf8(csv.remove(0)).unwrap();
    // header plus the initial row and one per step
    assert_eq!(text.lines().count(), 22);
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "grid.n = 64\nphys.mu = -1\n").unwrap();
    let out = nss().arg("run").arg(&bad).arg("--output-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&bad, "grid.nn = 64\n").unwrap();
    let out = nss().arg("mms").arg(&bad).arg("--output-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_checks_exit_with_code_five() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(bundled("mms-rho.conf")).unwrap();
    let cfg = dir.path().join("strict.conf");
    std::fs::write(&cfg, text.replace("mms.min_order = 0.9", "mms.min_order = 3").replace("32, 64, 128", "16, 32")).unwrap();
    let out = nss().arg("convergence").arg(&cfg).arg("--output-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
    assert!(dir.path().join("mms.csv").exists());
    let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("check failed"));
}

#[test]
fn probe_command_writes_twenty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let status = nss().arg("probe").arg(bundled("probe.conf")).arg("--output-dir").arg(dir.path()).status().unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.path().join("probe.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
}
