#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_neuroalign");

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("NEUROALIGN_THREADS")
        .output()
        .expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exited normally")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic set written under `dir/data`; returns the manifest path.
pub fn tiny_synth(dir: &Path) -> PathBuf {
    let out = dir.join("data");
    run_ok(&[
        "synth", "--concepts", "30", "--test-concepts", "6", "--images-per", "4", "--embed-dim", "8",
        "--channels", "3", "--time-points", "6", "--seed", "3", "--out", s(&out),
    ]);
    out.join("manifest.json")
}

pub const TINY_TRAIN: [&str; 10] = [
    "--epochs", "3", "--batch-size", "32", "--embed-dim", "16", "--shared-dim", "8", "--lr", "3e-3",
];

pub fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}
