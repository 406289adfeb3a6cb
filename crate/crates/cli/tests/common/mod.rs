#![allow(dead_code)]

use std::path::PathBuf;
use std::process::Command;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn ddimpl(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_ddimpl"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

pub fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

/// `check` arguments for one of the hand fixtures against the decaying reference at `L = 2`.
pub fn hand_check(plant: &str) -> Vec<String> {
    let n = if plant == "integrator" { "1,1" } else { "0,1" };
    [
        "check",
        "--plant",
        &fixture(&format!("{plant}.csv")),
        "--ref",
        &fixture("decay.csv"),
        "--picks-w",
        "2",
        "--picks-c",
        "1",
        "--L",
        "2",
        "--lag-bound",
        "1",
        "--m-bound",
        "1,0",
        "--n-bound",
        n,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

pub fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}
