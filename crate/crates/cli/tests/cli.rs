//! End-to-end checks of the command-line interface: artifacts on disk,
//! exit codes, and byte-for-byte determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_planar-mhd"))
}

fn tmp_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("planar-mhd-cli-{name}"));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn verify_eigen_small_sample_passes() {
    let dir = tmp_dir("eigen");
    let status = bin()
        .args(["--out-dir"])
        .arg(&dir)
        .args(["verify-eigen", "--samples", "200"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("summary.json").exists());
    let csv = fs::read_to_string(dir.join("eigensystems.csv")).unwrap();
    assert!(csv.starts_with("label,family,lambda,r1"));
    assert!(csv.lines().count() > 15);
}

#[test]
fn verify_coeffs_is_deterministic() {
    let run = |name: &str| -> String {
        let dir = tmp_dir(name);
        let status = bin()
            .args(["--out-dir"])
            .arg(&dir)
            .args([
                "verify-coeffs",
                "--samples",
                "300",
                "--fd-samples",
                "50",
                "--seed",
                "99",
            ])
            .status()
            .unwrap();
        assert!(status.success());
        fs::read_to_string(dir.join("summary.json")).unwrap()
    };
    let a = run("coeffs-a");
    let b = run("coeffs-b");
    assert_eq!(a, b, "same config must produce identical summaries");
}

#[test]
fn simulate_euler_small_grid_finds_shock() {
    let dir = tmp_dir("sim-euler");
    let out = bin()
        .args(["--out-dir"])
        .arg(&dir)
        .args([
            "simulate",
            "--regime",
            "euler",
            "--nodes",
            "1024",
            "--data",
            "shock",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = fs::read_to_string(dir.join("summary.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(json["regime"], "euler");
    assert!(json["shock"]["t_star"].as_f64().unwrap() > 0.0);
    for artifact in ["norms.csv", "initial_field.csv", "final_field.csv", "z0_trace.csv"] {
        assert!(dir.join(artifact).exists(), "{artifact} missing");
    }
}

#[test]
fn config_file_and_overrides() {
    let dir = tmp_dir("config");
    let cfg_path = dir.join("run.cfg");
    fs::write(&cfg_path, "[phys]\ntheta = 0.004\n[run]\nregime = euler\nnodes = 1024\n").unwrap();
    let out = bin()
        .args(["--out-dir"])
        .arg(&dir)
        .args(["--config"])
        .arg(&cfg_path)
        .args(["--set", "phys.theta=0.008", "simulate"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["params"]["theta"].as_f64().unwrap(), 0.008);
    assert_eq!(json["regime"], "euler");
}

#[test]
fn distinct_exit_codes() {
    // Oversized theta: parameter validation failure -> 3.
    let dir = tmp_dir("exit3");
    let status = bin()
        .args(["--out-dir"])
        .arg(&dir)
        .args(["--set", "phys.theta=0.5", "simulate", "--nodes", "1024"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    // Malformed config -> 2.
    let dir = tmp_dir("exit2");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "not a key value line").unwrap();
    let status = bin()
        .args(["--out-dir"])
        .arg(&dir)
        .args(["--config"])
        .arg(&cfg)
        .args(["verify-eigen", "--samples", "10"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // Unknown regime -> 2 (config).
    let dir = tmp_dir("exit2b");
    let status = bin()
        .args(["--out-dir"])
        .arg(&dir)
        .args(["simulate", "--regime", "plasma"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn trace_command_emits_csv() {
    let dir = tmp_dir("trace");
    let status = bin()
        .args(["--out-dir"])
        .arg(&dir)
        .args([
            "trace",
            "--regime",
            "h1zero",
            "--nodes",
            "2048",
            "--family",
            "1",
            "--launch",
            "-0.1,0.1",
            "--t-max",
            "0.5",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(dir.join("trace_f1_z-0.1.csv")).unwrap();
    assert!(csv.starts_with("family,z,t,x,rho,w,v"));
    assert!(Path::new(&dir.join("run_snapshots.csv")).exists());
}

#[test]
fn help_documents_exit_codes() {
    let out = bin().arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Exit codes"));
    assert!(text.contains("identity failure"));
}
