use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use ndarray::Array2;
use rayon::prelude::*;
use serde_json::json;

use reben_core::labeling::pixels_per_side;
use reben_core::patch::{PatchExtent, PatchId, TileExtent};
use reben_core::pipeline::{gate_tiles, screen_patch, tile_to_patches, Band, Disposition, PatchFlags, PatchPixels, TileQualityReport};
use reben_core::raster::{read_geotiff, write_geotiff, GeoRaster};

use crate::config::RunConfig;
use crate::dataset::{self, band_file, patch_dir, Manifest, PatchMeta, AUX_LIST_FILE};
use crate::error::{AppError, AppResult};

pub const QUALITY_FILE: &str = "quality.json";

struct TileInput {
    dir: PathBuf,
    report: TileQualityReport,
}

struct LoadedTile {
    extent: TileExtent,
    bands: Vec<(&'static str, f64, GeoRaster)>,
}

/// Quality-gates every tile below `--input`, cuts the passing ones into
/// patches and writes the non-dropped patches to `<out-dir>/patches`.
pub fn run(config: &RunConfig) -> AppResult<Manifest<'_>> {
    let input = config.require(&config.input, "input")?;
    let out = config.out_dir()?;
    let snow = optional_list(config.snow_list.as_deref())?;
    let cloud = optional_list(config.cloud_list.as_deref())?;

    let tiles = read_tiles(input)?;
    let gate = gate_tiles(tiles.iter().map(|t| &t.report))?;
    for id in &gate.failed {
        warn!("tile {id} failed the quality gate and is skipped");
    }
    let passed: BTreeSet<&str> = gate.passed.iter().map(String::as_str).collect();

    let root = dataset::patches_dir(out);
    if root.exists() {
        fs::remove_dir_all(&root)?;
    }
    fs::create_dir_all(&root)?;

    let results: Vec<Vec<(PatchId, Disposition)>> = tiles
        .par_iter()
        .filter(|t| passed.contains(t.report.tile_id.as_str()))
        .map(|t| process_tile(config, t, out, &snow, &cloud))
        .collect::<AppResult<_>>()?;
    let mut dispositions: Vec<(PatchId, Disposition)> = results.into_iter().flatten().collect();
    dispositions.sort_by(|a, b| a.0.cmp(&b.0));

    let count = |d: Disposition| dispositions.iter().filter(|(_, x)| *x == d).count();
    let aux: Vec<&str> = dispositions
        .iter()
        .filter(|(_, d)| *d == Disposition::AuxiliaryList)
        .map(|(id, _)| id.as_str())
        .collect();
    let mut aux_text = aux.join("\n");
    if !aux_text.is_empty() {
        aux_text.push('\n');
    }
    fs::write(out.join(AUX_LIST_FILE), aux_text)?;

    let mut manifest = Manifest::new("tile", config);
    manifest.input("input", input)?;
    for (name, path) in [("snow_list", &config.snow_list), ("cloud_list", &config.cloud_list)] {
        if let Some(p) = path {
            manifest.input(name, p)?;
        }
    }
    manifest.counts = json!({
        "tiles": tiles.len(),
        "tiles_passed": gate.passed.len(),
        "tiles_failed": gate.failed.len(),
        "failed_tiles": gate.failed,
        "patches": dispositions.len(),
        "main": count(Disposition::Main),
        "auxiliary": count(Disposition::AuxiliaryList),
        "dropped": count(Disposition::Dropped),
    });
    info!("tiled {} of {} tiles into {} patches", gate.passed.len(), tiles.len(), dispositions.len());
    Ok(manifest)
}

fn optional_list(path: Option<&Path>) -> AppResult<BTreeSet<String>> {
    path.map(dataset::read_id_list).transpose().map(Option::unwrap_or_default)
}

fn read_tiles(input: &Path) -> AppResult<Vec<TileInput>> {
    let entries = fs::read_dir(input).map_err(|e| AppError::io(format!("{}: {e}", input.display())))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    dirs.into_iter()
        .map(|dir| {
            let path = dir.join(QUALITY_FILE);
            let text = fs::read_to_string(&path).map_err(|e| AppError::io(format!("{}: {e}", path.display())))?;
            let report = TileQualityReport::from_json(&text).map_err(|e| AppError::from(e).context(path.display()))?;
            Ok(TileInput { dir, report })
        })
        .collect()
}

fn load_tile(config: &RunConfig, tile: &TileInput) -> AppResult<LoadedTile> {
    let id = &tile.report.tile_id;
    let mut bands = Vec::new();
    let mut extent: Option<TileExtent> = None;
    for (name, res) in config.modality.all_bands() {
        let path = band_file(&tile.dir, name);
        if !path.is_file() {
            return Err(AppError::data(format!("tile {id}: missing band file {}", path.display())));
        }
        let raster = read_geotiff(&path)?;
        if raster.pixel_size != res {
            return Err(AppError::data(format!(
                "{}: pixel size {} m, expected {res} m",
                path.display(),
                raster.pixel_size
            )));
        }
        if raster.crs.is_none() {
            return Err(AppError::data(format!("{}: no CRS", path.display())));
        }
        let this = raster.tile_extent(id)?;
        match &extent {
            None => extent = Some(this),
            Some(e) if *e == this => {}
            Some(e) => {
                return Err(AppError::data(format!(
                    "{}: footprint {:?} differs from {:?}",
                    path.display(),
                    (this.origin_x, this.origin_y, this.size, &this.crs),
                    (e.origin_x, e.origin_y, e.size, &e.crs)
                )))
            }
        }
        bands.push((name, res, raster));
    }
    let extent = extent.ok_or_else(|| AppError::data(format!("tile {id}: no bands")))?;
    Ok(LoadedTile { extent, bands })
}

fn process_tile(
    config: &RunConfig,
    tile: &TileInput,
    out: &Path,
    snow: &BTreeSet<String>,
    cloud: &BTreeSet<String>,
) -> AppResult<Vec<(PatchId, Disposition)>> {
    let loaded = load_tile(config, tile)?;
    let ps = config.patch_size_m;
    let patches = tile_to_patches(&loaded.extent, ps);
    patches
        .par_iter()
        .map(|extent| process_patch(&loaded, extent, out, snow, cloud))
        .collect()
}

fn process_patch(
    tile: &LoadedTile,
    extent: &PatchExtent,
    out: &Path,
    snow: &BTreeSet<String>,
    cloud: &BTreeSet<String>,
) -> AppResult<(PatchId, Disposition)> {
    let id = extent.id();
    let mut pixels = PatchPixels::new(extent.size);
    let mut windows = Vec::with_capacity(tile.bands.len());
    for (name, res, raster) in &tile.bands {
        let n = pixels_per_side(extent.size, *res)?;
        let window = raster.window(extent.col as usize * n, extent.row as usize * n, n, n)?;
        let data = Array2::from_shape_vec((n, n), window.data.clone()).expect("window is n x n");
        pixels.insert(Band::new(*name, *res, data).with_nodata(window.nodata))?;
        windows.push((*name, window));
    }
    let mut flags = PatchFlags {
        snow: snow.contains(id.as_str()),
        cloud_or_shadow: cloud.contains(id.as_str()),
        has_invalid: false,
    };
    let disposition = screen_patch(&pixels, &flags);
    flags.has_invalid = pixels.has_invalid();
    if disposition == Disposition::Dropped {
        return Ok((id, disposition));
    }

    let dir = patch_dir(out, &id);
    fs::create_dir_all(&dir)?;
    for (name, window) in &windows {
        write_geotiff(&band_file(&dir, name), window)?;
    }
    let meta = PatchMeta {
        id: id.clone(),
        extent: extent.clone(),
        tile: tile.extent.clone(),
        flags,
        disposition,
        bands: windows.iter().map(|(n, _)| (*n).to_owned()).collect(),
        retention: None,
        labels: None,
        split: None,
    };
    dataset::write_meta(&dir, &meta)?;
    Ok((id, disposition))
}
