//! On-disk dataset layout under `--out-dir`.
//!
//! ```text
//! patches/<id>/<band>.tif
//! patches/<id>/reference_map.tif
//! patches/<id>/meta.json
//! snow_cloud_patches.txt
//! <subcommand>_manifest.json
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use reben_core::labeling::{MultiLabelSet, RetentionDecision};
use reben_core::patch::{PatchExtent, PatchId, TileExtent};
use reben_core::pipeline::{Disposition, PatchFlags};
use reben_core::split::SplitTag;

use crate::config::RunConfig;
use crate::error::{AppError, AppResult};

pub const PATCHES_DIR: &str = "patches";
pub const META_FILE: &str = "meta.json";
pub const REFERENCE_MAP_FILE: &str = "reference_map.tif";
pub const AUX_LIST_FILE: &str = "snow_cloud_patches.txt";
pub const STORE_FILE: &str = "patches.lmdb";
pub const BASELINE_DIR: &str = "baseline";

/// Sidecar written by `tile` and filled in by later stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchMeta {
    pub id: PatchId,
    pub extent: PatchExtent,
    pub tile: TileExtent,
    pub flags: PatchFlags,
    pub disposition: Disposition,
    pub bands: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retention: Option<RetentionDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<MultiLabelSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitTag>,
}

impl PatchMeta {
    /// Not rejected by the coverage check (or not labeled yet).
    pub fn retained(&self) -> bool {
        self.retention.is_none_or(|r| r.keep)
    }
}

pub fn patches_dir(out: &Path) -> PathBuf {
    out.join(PATCHES_DIR)
}

pub fn patch_dir(out: &Path, id: &PatchId) -> PathBuf {
    patches_dir(out).join(id.as_str())
}

pub fn band_file(dir: &Path, band: &str) -> PathBuf {
    dir.join(format!("{band}.tif"))
}

pub fn read_meta(dir: &Path) -> AppResult<PatchMeta> {
    let path = dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| AppError::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| AppError::data(format!("{}: {e}", path.display())))
}

pub fn write_meta(dir: &Path, meta: &PatchMeta) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    let path = dir.join(META_FILE);
    fs::write(&path, text).map_err(|e| AppError::io(format!("{}: {e}", path.display())))
}

/// Patch directories in id order.
pub fn list_patch_dirs(out: &Path) -> AppResult<Vec<PathBuf>> {
    let root = patches_dir(out);
    let entries = fs::read_dir(&root).map_err(|e| AppError::io(format!("{}: {e}", root.display())))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.join(META_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Reads a newline-delimited id list; blank lines and `#` comments are skipped.
pub fn read_id_list(path: &Path) -> AppResult<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(format!("{}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

pub fn sha256_file(path: &Path) -> AppResult<String> {
    let mut file = fs::File::open(path).map_err(|e| AppError::io(format!("{}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Digests of every regular file under `root`, keyed by relative path.
pub fn digest_tree(root: &Path) -> AppResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_owned()];
    while let Some(dir) = stack.pop() {
        if dir.is_file() {
            out.insert(dir.display().to_string(), sha256_file(&dir)?);
            continue;
        }
        let entries = fs::read_dir(&dir).map_err(|e| AppError::io(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap_or(&path);
                out.insert(rel.display().to_string(), sha256_file(&path)?);
            }
        }
    }
    Ok(out)
}

/// Machine-readable record of one run.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub subcommand: &'a str,
    pub config_sha256: String,
    pub config: &'a RunConfig,
    pub inputs: BTreeMap<String, BTreeMap<String, String>>,
    pub counts: serde_json::Value,
}

impl<'a> Manifest<'a> {
    pub fn new(subcommand: &'a str, config: &'a RunConfig) -> Self {
        Self {
            subcommand,
            config_sha256: config.digest(),
            config,
            inputs: BTreeMap::new(),
            counts: serde_json::Value::Null,
        }
    }

    /// Records the digests of a file or of every file below a directory.
    pub fn input(&mut self, name: &str, path: &Path) -> AppResult<()> {
        self.inputs.insert(name.to_owned(), digest_tree(path)?);
        Ok(())
    }

    pub fn write(&self, out: &Path) -> AppResult<PathBuf> {
        fs::create_dir_all(out)?;
        let path = out.join(format!("{}_manifest.json", self.subcommand));
        write_json(&path, self)?;
        Ok(path)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| AppError::io(format!("{}: {e}", path.display())))
}
