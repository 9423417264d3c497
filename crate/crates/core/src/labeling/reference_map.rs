use log::warn;

use super::nomenclature::{ClassIndex, ClassNomenclature, NUM_CLASSES};
use super::polygons::{normalize_crs, LandCoverPolygon, LandCoverPolygonSet};
use super::LabelError;
use crate::patch::PatchExtent;

/// Pixel value for pixels without a mapped class.
pub const UNLABELED: u16 = u16::MAX;

/// Per-pixel class raster of one patch, row-major with row 0 at the north edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceMap {
    width: usize,
    height: usize,
    values: Vec<u16>,
}

impl ReferenceMap {
    pub fn unlabeled(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![UNLABELED; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<u16>) -> Result<Self, LabelError> {
        if values.len() != width * height {
            return Err(LabelError::Raster(format!(
                "{} values for a {width}x{height} map",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|&&v| v != UNLABELED && usize::from(v) >= NUM_CLASSES) {
            return Err(LabelError::Raster(format!("invalid class value {v}")));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u16> {
        self.values
    }

    pub fn get(&self, col: usize, row: usize) -> u16 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, class: Option<ClassIndex>) {
        self.values[row * self.width + col] = class.map_or(UNLABELED, u16::from);
    }

    pub fn class_at(&self, col: usize, row: usize) -> Option<ClassIndex> {
        match self.get(col, row) {
            UNLABELED => None,
            v => Some(v as ClassIndex),
        }
    }
}

/// Result of rasterizing a patch, with the number of pixels claimed by more
/// than one polygon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rasterized {
    pub map: ReferenceMap,
    pub overlapping_pixels: usize,
}

/// Rasterizes `polygons` onto the pixel grid of `patch`.
///
/// A pixel takes the class of the polygon containing its center; the
/// polygon listed last wins where polygons overlap. Pixels covered by no
/// polygon, or by a polygon whose code has no class, are [`UNLABELED`].
pub fn rasterize_reference_map(
    polygons: &LandCoverPolygonSet,
    patch: &PatchExtent,
    resolution: f64,
    nomenclature: &ClassNomenclature,
) -> Result<ReferenceMap, LabelError> {
    let rasterized = rasterize_with_diagnostics(polygons, patch, resolution, nomenclature)?;
    if rasterized.overlapping_pixels > 0 {
        warn!(
            "patch {}: {} pixels covered by overlapping polygons, last polygon wins",
            patch.id(),
            rasterized.overlapping_pixels
        );
    }
    Ok(rasterized.map)
}

pub fn rasterize_with_diagnostics(
    polygons: &LandCoverPolygonSet,
    patch: &PatchExtent,
    resolution: f64,
    nomenclature: &ClassNomenclature,
) -> Result<Rasterized, LabelError> {
    let patch_crs = normalize_crs(&patch.crs);
    match &polygons.crs {
        Some(crs) if *crs == patch_crs => {}
        other => {
            return Err(LabelError::CrsMismatch {
                expected: patch_crs,
                found: other.clone().unwrap_or_else(|| "none".into()),
            })
        }
    }
    let n = pixels_per_side(patch.size, resolution)?;
    let grid = PixelGrid {
        origin_x: patch.origin_x,
        origin_y: patch.origin_y,
        resolution,
        n,
    };

    let mut map = ReferenceMap::unlabeled(n, n);
    let mut hits = vec![0u8; n * n];
    let mut crossings = Vec::new();
    for polygon in &polygons.polygons {
        let class = nomenclature.class_of(polygon.code);
        grid.fill(polygon, &mut crossings, |col, row| {
            let idx = row * n + col;
            hits[idx] = hits[idx].saturating_add(1);
            map.set(col, row, class);
        });
    }
    let overlapping_pixels = hits.iter().filter(|&&h| h > 1).count();
    Ok(Rasterized {
        map,
        overlapping_pixels,
    })
}

/// Pixels per patch side; `size` must be an exact multiple of `resolution`.
pub fn pixels_per_side(size: f64, resolution: f64) -> Result<usize, LabelError> {
    let n = size / resolution;
    if !(resolution.is_finite() && resolution > 0.0) || n.fract() != 0.0 || n < 1.0 || n * resolution != size {
        return Err(LabelError::NonIntegerGrid { size, resolution });
    }
    Ok(n as usize)
}

struct PixelGrid {
    origin_x: f64,
    origin_y: f64,
    resolution: f64,
    n: usize,
}

impl PixelGrid {
    fn center_x(&self, col: usize) -> f64 {
        self.origin_x + (col as f64 + 0.5) * self.resolution
    }

    fn center_y(&self, row: usize) -> f64 {
        self.origin_y - (row as f64 + 0.5) * self.resolution
    }

    /// Scanline fill with the even-odd rule. A center belongs to a span
    /// `[x0, x1)` between consecutive edge crossings; an edge crosses row `y`
    /// when exactly one endpoint lies strictly above it.
    fn fill(&self, polygon: &LandCoverPolygon, crossings: &mut Vec<f64>, mut visit: impl FnMut(usize, usize)) {
        let (min_x, min_y, max_x, max_y) = polygon.bbox();
        if max_x < self.origin_x
            || min_x > self.center_x(self.n - 1)
            || max_y < self.center_y(self.n - 1)
            || min_y > self.origin_y
        {
            return;
        }
        let first_row = (((self.origin_y - max_y) / self.resolution - 0.5).floor().max(0.0)) as usize;
        for row in first_row..self.n {
            let y = self.center_y(row);
            if y < min_y {
                break;
            }
            crossings.clear();
            for ring in &polygon.rings {
                for (i, &(ax, ay)) in ring.iter().enumerate() {
                    let (bx, by) = ring[(i + 1) % ring.len()];
                    if (ay > y) != (by > y) {
                        crossings.push(ax + (y - ay) * (bx - ax) / (by - ay));
                    }
                }
            }
            crossings.sort_by(f64::total_cmp);
            for span in crossings.chunks_exact(2) {
                let (x0, x1) = (span[0], span[1]);
                let start = (((x0 - self.origin_x) / self.resolution - 0.5).floor().max(0.0)) as usize;
                for col in start..self.n {
                    let x = self.center_x(col);
                    if x >= x1 {
                        break;
                    }
                    if x >= x0 {
                        visit(col, row);
                    }
                }
            }
        }
    }
}
