use rayon::prelude::*;
use serde_json::json;

use reben_core::pipeline::{DatasetStats, PatchRecord};
use reben_core::split::SplitTag;

use crate::config::RunConfig;
use crate::dataset::{self, Manifest};
use crate::error::AppResult;

pub const STATS_FILE: &str = "stats.json";

/// Per-class, per-split counts over labeled and split patches.
pub fn run(config: &RunConfig) -> AppResult<Manifest<'_>> {
    let out = config.out_dir()?;
    let dirs = dataset::list_patch_dirs(out)?;
    let records = dirs
        .par_iter()
        .map(|d| {
            let meta = dataset::read_meta(d)?;
            Ok(match (meta.labels, meta.split) {
                (Some(labels), Some(split)) => Some(PatchRecord {
                    id: meta.id,
                    split,
                    labels,
                    flags: meta.flags,
                }),
                _ => None,
            })
        })
        .collect::<AppResult<Vec<_>>>()?;
    let stats: DatasetStats = records
        .par_iter()
        .flatten()
        .fold(DatasetStats::default, |mut s, r| {
            s.add_record(r);
            s
        })
        .reduce(DatasetStats::default, |a, b| a + b);
    dataset::write_json(&out.join(STATS_FILE), &stats)?;

    let mut manifest = Manifest::new("stats", config);
    manifest.counts = json!({
        "records": records.iter().flatten().count(),
        "train": stats.patches(SplitTag::Train),
        "val": stats.patches(SplitTag::Validation),
        "test": stats.patches(SplitTag::Test),
    });
    Ok(manifest)
}
