use std::collections::HashMap;

use log::warn;
use rayon::prelude::*;

use reben_core::patch::PatchExtent;
use reben_core::split::{assign_split, separation_stats, SplitCounts, SplitError, SplitGeometry, SplitTag};

use crate::config::RunConfig;
use crate::dataset::{self, Manifest};
use crate::error::AppResult;

pub const SEPARATION_FILE: &str = "split_separation.json";

/// Tags every retained patch by its position within its tile.
pub fn run(config: &RunConfig) -> AppResult<Manifest<'_>> {
    let out = config.out_dir()?;
    let dirs = dataset::list_patch_dirs(out)?;
    let metas = dirs
        .par_iter()
        .map(|d| dataset::read_meta(d))
        .collect::<AppResult<Vec<_>>>()?;

    let mut geometries: HashMap<u64, SplitGeometry> = HashMap::new();
    for meta in &metas {
        let size = meta.tile.size;
        if let std::collections::hash_map::Entry::Vacant(e) = geometries.entry(size.to_bits()) {
            e.insert(SplitGeometry::new(size, config.split.p, config.split.q)?);
        }
    }

    let assigned: Vec<Option<(PatchExtent, SplitTag)>> = dirs
        .par_iter()
        .zip(metas.into_par_iter())
        .map(|(dir, mut meta)| {
            meta.split = if meta.retained() {
                Some(assign_split(&meta.extent, &meta.tile, &geometries[&meta.tile.size.to_bits()])?)
            } else {
                None
            };
            dataset::write_meta(dir, &meta)?;
            Ok(meta.split.map(|t| (meta.extent, t)))
        })
        .collect::<AppResult<_>>()?;
    let assigned: Vec<(PatchExtent, SplitTag)> = assigned.into_iter().flatten().collect();
    let counts: SplitCounts = assigned.iter().map(|(_, t)| *t).collect();

    match separation_stats(&assigned) {
        Ok(report) => dataset::write_json(&out.join(SEPARATION_FILE), &report)?,
        Err(SplitError::EmptyTag(tag)) => warn!("no patch tagged {tag}; separation report skipped"),
        Err(e) => return Err(e.into()),
    }

    let mut manifest = Manifest::new("split", config);
    manifest.counts = serde_json::to_value(counts)?;
    Ok(manifest)
}
