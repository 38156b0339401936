//! End-to-end checks of the twinslit binary: exit codes, output files, and
//! reproducibility across thread counts.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twinslit"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn pattern_writes_outputs_and_is_thread_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("t1");
    let out2 = dir.path().join("t2");
    for (out, threads) in [(&out1, "1"), (&out2, "2")] {
        let status = bin()
            .args(["--seed", "7", "--threads", threads, "--out"])
            .arg(out)
            .arg("pattern")
            .status()
            .unwrap();
        assert!(status.success());
        assert!(out.join("pattern.csv").exists());
        assert!(out.join("pattern.json").exists());
    }
    assert_eq!(
        read(&out1.join("pattern.csv")),
        read(&out2.join("pattern.csv")),
        "pattern output depends on --threads"
    );
}

#[test]
fn dbb_writes_report_with_small_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    std::fs::write(&config, "[engine]\nensemble_size = 40\n").unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["--seed", "3", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("dbb")
        .status()
        .unwrap();
    assert!(status.success());
    let text = read(&out.join("dbb.json"));
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["result"]["report"]["n_pairs"], 40);
    assert_eq!(doc["config"]["seed"], 3);
}

#[test]
fn invalid_config_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[engine]\nstep = -1.0\n").unwrap();
    let status = bin()
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .arg("pattern")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("typo.toml");
    std::fs::write(&config, "[engine]\nstepp = 1e-3\n").unwrap();
    let status = bin()
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .arg("pattern")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn usage_error_exits_1() {
    let status = bin().arg("no-such-command").status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn unwritable_output_directory_exits_2() {
    let status = bin()
        .args(["--out", "/proc/no/such/dir", "pattern"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
