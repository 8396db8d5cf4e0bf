#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use gscodec::ply_io::write_ply_bytes;
use gscodec::GaussianCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random cloud with plausible value ranges and distinct rows.
pub fn random_cloud(n: usize, seed: u64) -> GaussianCloud {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f32>> = (0..n)
        .map(|_| {
            let mut row = Vec::with_capacity(59);
            row.extend((0..3).map(|_| r.random_range(-10.0f32..10.0)));
            row.extend((0..3).map(|_| r.random_range(-6.0f32..-1.0)));
            row.extend((0..4).map(|_| r.random_range(-1.0f32..1.0)));
            row.push(r.random_range(-6.0f32..6.0));
            row.extend((0..48).map(|_| r.random_range(-1.0f32..1.0)));
            row
        })
        .collect();
    GaussianCloud::from_rows(&rows).expect("finite rows")
}

pub fn write_cloud(path: &Path, cloud: &GaussianCloud) {
    std::fs::write(path, write_ply_bytes(cloud)).unwrap();
}

pub fn gscodec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gscodec"))
        .args(args)
        .env_remove("GSCODEC_THREADS")
        .output()
        .expect("running gscodec")
}

pub fn ok(args: &[&str]) -> Output {
    let out = gscodec(args);
    assert!(
        out.status.success(),
        "gscodec {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn json(args: &[&str]) -> serde_json::Value {
    let mut all = args.to_vec();
    all.push("--json");
    serde_json::from_slice(&ok(&all).stdout).expect("JSON output")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Rows as bit patterns, sorted, for multiset comparison.
pub fn row_multiset(cloud: &GaussianCloud) -> Vec<Vec<u32>> {
    let mut rows: Vec<Vec<u32>> = (0..cloud.len())
        .map(|i| cloud.row(i).iter().map(|v| v.to_bits()).collect())
        .collect();
    rows.sort();
    rows
}
