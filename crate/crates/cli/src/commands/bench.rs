use reben_store::{bench_random_read, write_baseline, PatchStore};

use crate::config::RunConfig;
use crate::dataset::{self, Manifest, BASELINE_DIR, STORE_FILE};
use crate::error::AppResult;

pub const REPORT_FILE: &str = "bench_report.json";

/// Random-read throughput of the store against the per-file baseline.
pub fn run(config: &RunConfig, loads: usize) -> AppResult<Manifest<'_>> {
    let out = config.out_dir()?;
    let store = PatchStore::open_read_only(&out.join(STORE_FILE))?;
    let baseline = out.join(BASELINE_DIR);
    if !baseline.is_dir() {
        write_baseline(&store, &baseline)?;
    }
    let keys = store.snapshot()?.keys()?;
    let report = bench_random_read(&store, &baseline, &keys, loads, config.seed)?;
    dataset::write_json(&out.join(REPORT_FILE), &report)?;

    let mut manifest = Manifest::new("bench", config);
    manifest.counts = serde_json::json!({ "keys": keys.len(), "loads": loads });
    Ok(manifest)
}
