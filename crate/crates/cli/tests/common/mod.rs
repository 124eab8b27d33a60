//! Shared helpers for integration tests: dataset locations and binary
//! invocation.

use std::path::PathBuf;
use std::process::{Command, Output};

/// Root data directory: `$DISTLAB_DATA_DIR`, or `<workspace>/data`.
pub fn data_root() -> PathBuf {
    match std::env::var_os("DISTLAB_DATA_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

/// Directory holding the raw MNIST IDX files, or panic with instructions.
pub fn mnist_dir() -> PathBuf {
    let dir = data_root().join("mnist");
    assert!(
        dir.join("t10k-images-idx3-ubyte").is_file(),
        "MNIST not found at {} — place the IDX files there or set DISTLAB_DATA_DIR",
        dir.display()
    );
    dir
}

/// Directory holding the CIFAR-10 binary batches, or panic with instructions.
#[allow(dead_code)]
pub fn cifar_dir() -> PathBuf {
    let dir = data_root().join("cifar10");
    assert!(
        dir.join("test_batch.bin").is_file(),
        "CIFAR-10 not found at {} — place the binary batches there or set DISTLAB_DATA_DIR",
        dir.display()
    );
    dir
}

/// Run the distlab binary with the given arguments.
#[allow(dead_code)]
pub fn distlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distlab"))
        .args(args)
        .output()
        .expect("spawn distlab")
}

/// Stderr of a failed invocation, asserting the exit code is 1.
#[allow(dead_code)]
pub fn failure_stderr(args: &[&str]) -> String {
    let out = distlab(args);
    assert_eq!(out.status.code(), Some(1), "expected exit 1 for {args:?}");
    String::from_utf8(out.stderr).expect("stderr is UTF-8")
}
