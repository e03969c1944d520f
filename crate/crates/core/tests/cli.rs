//! End-to-end tests of the `gfma` binary.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gfma"))
}

fn small_config(dir: &tempfile::TempDir) -> PathBuf {
    let path = dir.path().join("small.cfg");
    std::fs::write(&path, "profile = desk\nN = 8\nM = 16\nK = 24\nKa = 3\nT = 6\nN_iter = 2\nseed = 5\n").unwrap();
    path
}

#[test]
fn run_writes_exact_header_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir);
    let out = |name: &str, workers: &str| {
        let path = dir.path().join(name);
        let status = bin()
            .env("GFMA_WORKERS", workers)
            .args(["run", "--config"])
            .arg(&cfg)
            .args(["--trials", "6", "--schemes", "proposed,baseline3", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let a = out("a.csv", "1");
    let b = out("b.csv", "3");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sweep_var,value,scheme,metric,mean,stderr,trials,seed"));
    assert!(text.contains("none,-,proposed,adep,"));
    assert!(text.contains("none,-,baseline3,ber,"));
    assert!(lines.all(|l| l.split(',').count() == 8 && l.ends_with(",5")));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir);
    let out = bin().args(["run", "--trials", "2", "--seed", "77", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",77")));
}

#[test]
fn sweep_emits_one_block_per_value_and_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir);
    let out = bin()
        .args(["sweep", "--var", "T", "--values", "4,6", "--schemes", "proposed,baseline2", "--trials", "3", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    for t in ["4", "6"] {
        for scheme in ["proposed", "baseline2"] {
            assert!(text.contains(&format!("T,{t},{scheme},adep,")), "missing T={t} {scheme}");
        }
    }
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir);
    let out = bin().args(["sweep", "--var", "bogus", "--values", "1", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());

    let broken = dir.path().join("broken.cfg");
    std::fs::write(&broken, "K = many\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&broken).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn trace_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir);
    let trace = dir.path().join("trace.csv");
    let status = bin().args(["run", "--trials", "1", "--trace"]).arg(&trace).arg("--config").arg(&cfg).output().unwrap();
    assert!(status.status.success());
    assert!(std::fs::read_to_string(trace).unwrap().lines().count() > 1);
}
