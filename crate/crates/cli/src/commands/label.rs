use rayon::prelude::*;
use serde_json::json;

use reben_core::labeling::{
    extract_multilabels, rasterize_reference_map, retention_decision, ClassNomenclature, LandCoverPolygonSet,
    RetentionReason, UNLABELED,
};
use reben_core::raster::{write_geotiff, GeoRaster};

use crate::config::RunConfig;
use crate::dataset::{self, Manifest, REFERENCE_MAP_FILE};
use crate::error::AppResult;

/// Rasterizes a reference map for every patch, applies the coverage rule
/// and derives multi-labels for the retained ones.
pub fn run(config: &RunConfig) -> AppResult<Manifest<'_>> {
    let out = config.out_dir()?;
    let polygons_dir = config.require(&config.polygons, "polygons")?;
    let polygons = LandCoverPolygonSet::from_dir(polygons_dir)?;
    let nomenclature = match &config.nomenclature_path {
        Some(p) => ClassNomenclature::from_path(p)?,
        None => ClassNomenclature::default(),
    };
    let threshold = config.threshold();

    let dirs = dataset::list_patch_dirs(out)?;
    let reasons: Vec<RetentionReason> = dirs
        .par_iter()
        .map(|dir| {
            let mut meta = dataset::read_meta(dir)?;
            let map = rasterize_reference_map(&polygons, &meta.extent, config.resolution_m, &nomenclature)
                .map_err(|e| crate::error::AppError::from(e).context(&meta.id))?;
            let decision = retention_decision(&map, threshold);
            meta.labels = if decision.keep {
                Some(extract_multilabels(&map, config.min_label_fraction)?)
            } else {
                None
            };
            meta.retention = Some(decision);
            meta.split = None;
            let raster = GeoRaster {
                width: map.width(),
                height: map.height(),
                origin_x: meta.extent.origin_x,
                origin_y: meta.extent.origin_y,
                pixel_size: config.resolution_m,
                crs: Some(meta.extent.crs.clone()),
                nodata: Some(UNLABELED),
                data: map.into_values(),
            };
            write_geotiff(&dir.join(REFERENCE_MAP_FILE), &raster)?;
            dataset::write_meta(dir, &meta)?;
            Ok(decision.reason)
        })
        .collect::<AppResult<_>>()?;

    let count = |r: RetentionReason| reasons.iter().filter(|x| **x == r).count();
    let mut manifest = Manifest::new("label", config);
    manifest.input("polygons", polygons_dir)?;
    if let Some(p) = &config.nomenclature_path {
        manifest.input("nomenclature", p)?;
    }
    manifest.counts = json!({
        "patches": reasons.len(),
        "retained": count(RetentionReason::Kept),
        "low_coverage": count(RetentionReason::LowCoverage),
        "no_labels": count(RetentionReason::NoLabels),
    });
    Ok(manifest)
}
