//! Random-read benchmark of the store against one file per patch.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use serde::Serialize;

use crate::format::decode_record;
use crate::store::{PatchStore, StoreError};

/// File extension of the per-patch baseline files.
pub const BASELINE_EXTENSION: &str = "safetensors";

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BenchmarkReport {
    /// Loads per second from the store.
    pub store_lps: f64,
    /// Loads per second from the per-file baseline.
    pub baseline_lps: f64,
    pub speedup: f64,
    /// Store load latency percentiles in microseconds.
    pub p50_us: f64,
    pub p99_us: f64,
}

pub fn baseline_path(dir: &Path, key: &str) -> Result<PathBuf, StoreError> {
    if key.is_empty() || key == "." || key == ".." || key.contains(['/', '\\', '\0']) {
        return Err(StoreError::InvalidKey(key.to_owned()));
    }
    Ok(dir.join(format!("{key}.{BASELINE_EXTENSION}")))
}

/// Writes every store entry to `dir/<key>.safetensors`, byte for byte.
pub fn write_baseline(store: &PatchStore, dir: &Path) -> Result<u64, StoreError> {
    fs::create_dir_all(dir)?;
    let snap = store.snapshot()?;
    let mut written = 0;
    let mut result = Ok(());
    snap.for_each(|key, value| {
        if result.is_ok() {
            result = baseline_path(dir, key).and_then(|p| fs::write(p, value).map_err(StoreError::from));
            written += 1;
        }
    })?;
    result.map(|()| written)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Loads `n` uniformly drawn keys from the store and from `baseline_dir`,
/// decoding every value. Both sides draw the same key sequence.
pub fn bench_random_read(
    store: &PatchStore,
    baseline_dir: &Path,
    keys: &[String],
    n: usize,
    seed: u64,
) -> Result<BenchmarkReport, StoreError> {
    if n == 0 || keys.is_empty() {
        return Ok(BenchmarkReport::default());
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let picks: Vec<&str> = (0..n).map(|_| keys[rng.random_range(0..keys.len())].as_str()).collect();
    let paths = picks
        .iter()
        .map(|k| baseline_path(baseline_dir, k))
        .collect::<Result<Vec<_>, _>>()?;

    let snap = store.snapshot()?;
    let mut latencies = Vec::with_capacity(n);
    let start = Instant::now();
    for key in &picks {
        let t = Instant::now();
        let record = snap.get(key)?.ok_or_else(|| StoreError::InvalidKey((*key).to_owned()))?;
        std::hint::black_box(record);
        latencies.push(t.elapsed().as_secs_f64() * 1e6);
    }
    let store_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    for (key, path) in picks.iter().zip(&paths) {
        let bytes = fs::read(path)?;
        let record = decode_record(&bytes).map_err(|source| StoreError::Format {
            key: (*key).to_owned(),
            source,
        })?;
        std::hint::black_box(record);
    }
    let baseline_secs = start.elapsed().as_secs_f64();

    latencies.sort_by(f64::total_cmp);
    let store_lps = n as f64 / store_secs.max(f64::MIN_POSITIVE);
    let baseline_lps = n as f64 / baseline_secs.max(f64::MIN_POSITIVE);
    Ok(BenchmarkReport {
        store_lps,
        baseline_lps,
        speedup: store_lps / baseline_lps,
        p50_us: percentile(&latencies, 0.50),
        p99_us: percentile(&latencies, 0.99),
    })
}
