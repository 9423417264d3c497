#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use assert_cmd::Command;
use serde_json::{json, Value};

use reben_core::raster::{write_geotiff, GeoRaster};

pub const CRS: &str = "EPSG:32632";

pub fn bin() -> Command {
    let mut cmd = Command::cargo_bin("reben-pipeline").unwrap();
    cmd.env_remove("REBEN_PIPELINE_LOG");
    cmd
}

/// Writes `<input>/<tile_id>/{quality.json, VV.tif, VH.tif}` for a square
/// 10 m tile of `px` pixels. `value(col, row)` fills both bands.
pub fn s1_tile(
    input: &Path,
    tile_id: &str,
    origin: (f64, f64),
    px: usize,
    quality_ok: bool,
    value: impl Fn(usize, usize) -> u16,
) -> PathBuf {
    let dir = input.join(tile_id);
    fs::create_dir_all(&dir).unwrap();
    fs::write(
        dir.join("quality.json"),
        json!({"tile_id": tile_id, "radiometric_ok": quality_ok, "geometric_ok": true}).to_string(),
    )
    .unwrap();
    let data: Vec<u16> = (0..px * px).map(|i| value(i % px, i / px)).collect();
    for band in ["VV", "VH"] {
        let raster = GeoRaster {
            width: px,
            height: px,
            origin_x: origin.0,
            origin_y: origin.1,
            pixel_size: 10.0,
            crs: Some(CRS.into()),
            nodata: Some(0),
            data: data.clone(),
        };
        write_geotiff(&dir.join(format!("{band}.tif")), &raster).unwrap();
    }
    dir
}

/// Axis-aligned rectangles `(min_x, min_y, max_x, max_y, code)` as a GeoJSON
/// feature collection with a legacy `crs` member.
pub fn polygons(dir: &Path, name: &str, crs: &str, rects: &[(f64, f64, f64, f64, u16)]) {
    fs::create_dir_all(dir).unwrap();
    let features: Vec<Value> = rects
        .iter()
        .map(|&(x0, y0, x1, y1, code)| {
            json!({
                "type": "Feature",
                "properties": {"CODE_18": code.to_string()},
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]]
                }
            })
        })
        .collect();
    let fc = json!({
        "type": "FeatureCollection",
        "crs": {"type": "name", "properties": {"name": crs}},
        "features": features,
    });
    fs::write(dir.join(name), fc.to_string()).unwrap();
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

pub fn stdout_json(output: &std::process::Output) -> Value {
    serde_json::from_slice(&output.stdout).unwrap()
}
