use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use reben_core::raster::read_geotiff;
use reben_store::{write_baseline, PatchStore, Tensor, TensorRecord};

use crate::config::RunConfig;
use crate::dataset::{self, band_file, PatchMeta, BASELINE_DIR, REFERENCE_MAP_FILE, STORE_FILE};
use crate::error::{AppError, AppResult};

const BATCH_SIZE: usize = 512;
pub const REFERENCE_MAP_TENSOR: &str = "reference_map";

/// Writes one record per retained, split patch into `<out-dir>/patches.lmdb`,
/// and optionally the same bytes as one file per patch.
pub fn run(config: &RunConfig, baseline: bool) -> AppResult<dataset::Manifest<'_>> {
    let out = config.out_dir()?;
    let dirs = dataset::list_patch_dirs(out)?;
    let records: Vec<(String, TensorRecord)> = dirs
        .par_iter()
        .map(|dir| {
            let meta = dataset::read_meta(dir)?;
            if !meta.retained() || meta.split.is_none() || meta.retention.is_none() {
                return Ok(None);
            }
            Ok(Some((meta.id.to_string(), build_record(config, dir, &meta)?)))
        })
        .collect::<AppResult<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let store_path = out.join(STORE_FILE);
    remove_store(&store_path)?;
    let payload: usize = records
        .iter()
        .flat_map(|(_, r)| r.iter().map(|(_, t)| t.data().len() + 256))
        .sum();
    let store = PatchStore::create(&store_path, 2 * payload + (64 << 20))?;
    let report = store.write_records(records, BATCH_SIZE)?;

    if baseline {
        let dir = out.join(BASELINE_DIR);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        write_baseline(&store, &dir)?;
    }

    let mut manifest = dataset::Manifest::new("encode", config);
    manifest.counts = json!({
        "records": report.records,
        "bytes": report.bytes,
        "batches": report.batches,
        "content_sha256": content_digest(&store)?,
    });
    Ok(manifest)
}

fn build_record(config: &RunConfig, dir: &Path, meta: &PatchMeta) -> AppResult<TensorRecord> {
    let mut record = TensorRecord::new();
    let names = config.modality.model_bands();
    for name in names.iter().copied().chain([REFERENCE_MAP_TENSOR]) {
        let path = if name == REFERENCE_MAP_TENSOR {
            dir.join(REFERENCE_MAP_FILE)
        } else {
            band_file(dir, name)
        };
        if !path.is_file() {
            return Err(AppError::data(format!("patch {}: missing {}", meta.id, path.display())));
        }
        let raster = read_geotiff(&path)?;
        record.insert(name, Tensor::from_u16(vec![raster.height, raster.width], &raster.data)?);
    }
    Ok(record)
}

fn remove_store(path: &Path) -> AppResult<()> {
    let mut lock = path.as_os_str().to_owned();
    lock.push("-lock");
    for p in [path, Path::new(&lock)] {
        if p.is_file() {
            fs::remove_file(p)?;
        }
    }
    Ok(())
}

/// SHA-256 over length-prefixed key/value pairs in key order. Independent of
/// the page layout of the database file.
pub fn content_digest(store: &PatchStore) -> AppResult<String> {
    let mut hasher = Sha256::new();
    store.snapshot()?.for_each(|k, v| {
        hasher.update((k.len() as u64).to_le_bytes());
        hasher.update(k.as_bytes());
        hasher.update((v.len() as u64).to_le_bytes());
        hasher.update(v);
    })?;
    Ok(hex::encode(hasher.finalize()))
}
