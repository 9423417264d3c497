//! Geographical train/validation/test assignment.
//!
//! A square tile of side `s` is cut into three concentric regions: an outer
//! frame (training), an inner frame (validation) and an inner square (test).
//! `p` is the area fraction of the inner square and `q` the area fraction of
//! the inner frame, so the outer frame holds `1 - p - q` of the tile.
//!
//! Widths follow from the areas: the inner frame's outer edge is a square of
//! side `sqrt(p + q) * s`, hence
//!
//! ```text
//! f_o = ((1 - sqrt(p + q)) / 2) * s
//! f_i = ((sqrt(p + q) - sqrt(p)) / 2) * s
//! ```
//!
//! The frequently quoted form with the two expressions swapped does not
//! reproduce the region areas and is not used here.
//!
//! Patches are assigned by their center point. A center lying exactly on a
//! region boundary goes to the outer region, so ties never move a patch
//! towards the test set.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patch::{ExtentError, PatchExtent, TileExtent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("invalid split geometry: {0}")]
    Domain(String),
    #[error(transparent)]
    Extent(#[from] ExtentError),
    #[error("no patches tagged {0}")]
    EmptyTag(SplitTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

impl SplitTag {
    pub const ALL: [SplitTag; 3] = [SplitTag::Train, SplitTag::Validation, SplitTag::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Validation => "validation",
            SplitTag::Test => "test",
        }
    }

    pub fn index(self) -> usize {
        match self {
            SplitTag::Train => 0,
            SplitTag::Validation => 1,
            SplitTag::Test => 2,
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Computes `(f_o, f_i)` for a tile of side `s`.
pub fn frame_widths(s: f64, p: f64, q: f64) -> Result<(f64, f64), SplitError> {
    check_params(s, p, q)?;
    let outer_edge = (p + q).sqrt();
    let inner_edge = p.sqrt();
    Ok((((1.0 - outer_edge) / 2.0) * s, ((outer_edge - inner_edge) / 2.0) * s))
}

fn check_params(s: f64, p: f64, q: f64) -> Result<(), SplitError> {
    if !(s.is_finite() && s > 0.0) {
        return Err(SplitError::Domain(format!("tile side must be positive, got {s}")));
    }
    if !(p.is_finite() && p >= 0.0) || !(q.is_finite() && q >= 0.0) {
        return Err(SplitError::Domain(format!("p and q must be >= 0, got p={p}, q={q}")));
    }
    if p + q > 1.0 {
        return Err(SplitError::Domain(format!("p + q must be <= 1, got {}", p + q)));
    }
    Ok(())
}

/// Nested-frame parameters for one tile size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitGeometry {
    pub tile_size: f64,
    pub p: f64,
    pub q: f64,
    pub outer_width: f64,
    pub inner_width: f64,
    /// Distance from the tile edge to the inner square, `((1 - sqrt(p)) / 2) * s`.
    /// Kept separately so the test boundary does not accumulate the rounding
    /// of `outer_width + inner_width`.
    test_margin: f64,
}

impl SplitGeometry {
    pub fn new(tile_size: f64, p: f64, q: f64) -> Result<Self, SplitError> {
        let (outer_width, inner_width) = frame_widths(tile_size, p, q)?;
        Ok(Self {
            tile_size,
            p,
            q,
            outer_width,
            inner_width,
            test_margin: ((1.0 - p.sqrt()) / 2.0) * tile_size,
        })
    }

    /// Areas of (outer frame, inner frame, inner square) reconstructed from
    /// the frame widths.
    pub fn region_areas(&self) -> (f64, f64, f64) {
        let s = self.tile_size;
        let frame_side = s - 2.0 * self.outer_width;
        let square_side = frame_side - 2.0 * self.inner_width;
        (
            s * s - frame_side * frame_side,
            frame_side * frame_side - square_side * square_side,
            square_side * square_side,
        )
    }

    /// Tag of a point given its distance to the nearest tile edge.
    fn tag_for_edge_distance(&self, edge_distance: f64) -> SplitTag {
        if edge_distance <= self.outer_width {
            SplitTag::Train
        } else if edge_distance <= self.test_margin {
            SplitTag::Validation
        } else {
            SplitTag::Test
        }
    }

    /// Classifies a point inside `tile`.
    pub fn classify_point(&self, tile: &TileExtent, x: f64, y: f64) -> SplitTag {
        let edge_distance = (x - tile.min_x())
            .min(tile.max_x() - x)
            .min(y - tile.min_y())
            .min(tile.max_y() - y);
        self.tag_for_edge_distance(edge_distance)
    }
}

/// Assigns `patch` to a split by the position of its center within `tile`.
pub fn assign_split(
    patch: &PatchExtent,
    tile: &TileExtent,
    geom: &SplitGeometry,
) -> Result<SplitTag, SplitError> {
    if tile.size != geom.tile_size {
        return Err(SplitError::Domain(format!(
            "geometry is for {} m tiles, tile {} is {} m",
            geom.tile_size, tile.tile_id, tile.size
        )));
    }
    if patch.crs != tile.crs {
        return Err(SplitError::Domain(format!(
            "patch CRS {} differs from tile CRS {}",
            patch.crs, tile.crs
        )));
    }
    if !tile.contains(patch) {
        return Err(ExtentError::OutsideTile {
            patch: patch.id().to_string(),
            tile: tile.tile_id.clone(),
        }
        .into());
    }
    let (x, y) = patch.center();
    Ok(geom.classify_point(tile, x, y))
}

/// Repeating 4x4 cell pattern used by the grid baseline, indexed `[row][col]`.
/// Columns 0 and 2 are training; columns 1 and 3 alternate validation and
/// test by row parity. 8 train, 4 validation and 4 test cells per period.
pub const GRID_PATTERN: [[SplitTag; 4]; 4] = {
    use SplitTag::{Test as S, Train as T, Validation as V};
    [[T, V, T, S], [T, S, T, V], [T, V, T, S], [T, S, T, V]]
};

/// Side of the repeating pattern in cells.
pub const GRID_PERIOD: i64 = 4;

/// Grid-based comparison splitter: the tag is a pure function of the grid
/// cell containing the patch center.
pub fn assign_split_grid_baseline(patch: &PatchExtent, cell_size: f64) -> Result<SplitTag, SplitError> {
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(SplitError::Domain(format!("cell size must be positive, got {cell_size}")));
    }
    let (x, y) = patch.center();
    Ok(grid_tag(x, y, cell_size))
}

fn grid_tag(x: f64, y: f64, cell_size: f64) -> SplitTag {
    let col = (x / cell_size).floor() as i64;
    let row = (y / cell_size).floor() as i64;
    GRID_PATTERN[row.rem_euclid(GRID_PERIOD) as usize][col.rem_euclid(GRID_PERIOD) as usize]
}

/// Center-to-center distance summary between two tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationPair {
    pub from: SplitTag,
    pub to: SplitTag,
    pub min_m: f64,
    pub mean_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub pairs: Vec<SeparationPair>,
}

impl SeparationReport {
    pub fn pair(&self, from: SplitTag, to: SplitTag) -> Option<&SeparationPair> {
        self.pairs.iter().find(|p| p.from == from && p.to == to)
    }
}

/// Minimum and mean center distance for every ordered pair of distinct tags.
pub fn separation_stats(assignments: &[(PatchExtent, SplitTag)]) -> Result<SeparationReport, SplitError> {
    let mut centers: BTreeMap<SplitTag, Vec<(f64, f64)>> = BTreeMap::new();
    for (patch, tag) in assignments {
        centers.entry(*tag).or_default().push(patch.center());
    }
    for tag in SplitTag::ALL {
        if centers.get(&tag).is_none_or(Vec::is_empty) {
            return Err(SplitError::EmptyTag(tag));
        }
    }

    let mut pairs = Vec::with_capacity(6);
    for from in SplitTag::ALL {
        for to in SplitTag::ALL {
            if from == to {
                continue;
            }
            let a = &centers[&from];
            let b = &centers[&to];
            // per-center partials are summed in input order so the mean is
            // bit-identical for any thread count
            let partials: Vec<(f64, f64)> = a
                .par_iter()
                .map(|&(ax, ay)| {
                    b.iter().fold((f64::INFINITY, 0.0), |(min, sum), &(bx, by)| {
                        let d = (ax - bx).hypot(ay - by);
                        (min.min(d), sum + d)
                    })
                })
                .collect();
            let (min, sum) = partials
                .iter()
                .fold((f64::INFINITY, 0.0), |l, r| (l.0.min(r.0), l.1 + r.1));
            pairs.push(SeparationPair {
                from,
                to,
                min_m: min,
                mean_m: sum / (a.len() * b.len()) as f64,
            });
        }
    }
    Ok(SeparationReport { pairs })
}

/// Per-tag patch counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: u64,
    #[serde(rename = "val")]
    pub validation: u64,
    pub test: u64,
}

impl SplitCounts {
    pub fn add(&mut self, tag: SplitTag) {
        match tag {
            SplitTag::Train => self.train += 1,
            SplitTag::Validation => self.validation += 1,
            SplitTag::Test => self.test += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.train + self.validation + self.test
    }
}

impl FromIterator<SplitTag> for SplitCounts {
    fn from_iter<I: IntoIterator<Item = SplitTag>>(iter: I) -> Self {
        let mut counts = SplitCounts::default();
        iter.into_iter().for_each(|t| counts.add(t));
        counts
    }
}
