#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_reluwrap"));
    cmd.env_remove("RELUWRAP_SEED");
    cmd
}

/// Run the CLI in `dir` and return its output.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn reluwrap")
}

/// Run the CLI in `dir` and panic with stderr on failure.
pub fn ok(dir: &Path, args: &[&str]) {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "reluwrap {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn csv_rows(dir: &Path, name: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(dir.join(name)).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

/// A directory with a CoCircles CSV and a trained 8-8 model.
pub fn trained_cocircles(seed: &str) -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_path_buf();
    ok(&dir, &["generate", "cocircles", "--n", "600", "--seed", seed]);
    ok(&dir, &["train", "data.csv", "--hidden", "8,8", "--max-epochs", "60", "--seed", seed]);
    (tmp, dir)
}

/// Activation pattern strings computed directly from the weights.
pub fn oracle_patterns(
    net: &reluwrap_core::NetworkSpec,
    x: &ndarray::Array2<f64>,
) -> Vec<String> {
    x.outer_iter()
        .map(|row| {
            let mut a = row.to_owned();
            let mut bits = String::new();
            let (_, hidden) = net.layers().split_last().unwrap();
            for layer in hidden {
                let z = layer.weights.dot(&a) + &layer.bias;
                bits.extend(z.iter().map(|&v| if v > 0.0 { '1' } else { '0' }));
                a = z.mapv(|v| v.max(0.0));
            }
            bits
        })
        .collect()
}
