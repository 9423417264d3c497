//! Georeferenced tile and patch footprints.
//!
//! Coordinates are projected meters. A footprint is anchored at its
//! upper-left corner (the GeoTIFF tiepoint convention): `x` grows east,
//! rows grow south, so a footprint spans `[origin_x, origin_x + size]`
//! by `[origin_y - size, origin_y]`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default patch side length in meters.
pub const DEFAULT_PATCH_SIZE_M: f64 = 1200.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtentError {
    #[error("tile is not square: {width} m x {height} m")]
    NotSquare { width: f64, height: f64 },
    #[error("extent size must be positive and finite, got {0}")]
    InvalidSize(f64),
    #[error("patch {patch} is not contained in tile {tile}")]
    OutsideTile { patch: String, tile: String },
}

/// Square footprint of a tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileExtent {
    pub tile_id: String,
    /// Upper-left corner.
    pub origin_x: f64,
    pub origin_y: f64,
    /// Side length in meters.
    pub size: f64,
    pub crs: String,
}

impl TileExtent {
    pub fn new(
        tile_id: impl Into<String>,
        origin_x: f64,
        origin_y: f64,
        size: f64,
        crs: impl Into<String>,
    ) -> Result<Self, ExtentError> {
        if !(size.is_finite() && size > 0.0) {
            return Err(ExtentError::InvalidSize(size));
        }
        Ok(Self {
            tile_id: tile_id.into(),
            origin_x,
            origin_y,
            size,
            crs: crs.into(),
        })
    }

    /// Builds a tile from a bounding box, rejecting non-square boxes.
    pub fn from_bounds(
        tile_id: impl Into<String>,
        min_x: f64,
        min_y: f64,
        max_x: f64,
        max_y: f64,
        crs: impl Into<String>,
    ) -> Result<Self, ExtentError> {
        let width = max_x - min_x;
        let height = max_y - min_y;
        if width != height {
            return Err(ExtentError::NotSquare { width, height });
        }
        Self::new(tile_id, min_x, max_y, width, crs)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.origin_x + self.size / 2.0,
            self.origin_y - self.size / 2.0,
        )
    }

    pub fn min_x(&self) -> f64 {
        self.origin_x
    }

    pub fn max_x(&self) -> f64 {
        self.origin_x + self.size
    }

    pub fn min_y(&self) -> f64 {
        self.origin_y - self.size
    }

    pub fn max_y(&self) -> f64 {
        self.origin_y
    }

    /// Whether `patch` lies fully inside this tile (edges inclusive).
    pub fn contains(&self, patch: &PatchExtent) -> bool {
        patch.min_x() >= self.min_x()
            && patch.max_x() <= self.max_x()
            && patch.min_y() >= self.min_y()
            && patch.max_y() <= self.max_y()
    }
}

/// Stable identity of a patch, also its key in the tensor store.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatchId(String);

impl PatchId {
    /// `{tile_id}_{col:02}_{row:02}`
    pub fn new(tile_id: &str, col: u32, row: u32) -> Self {
        PatchId(format!("{tile_id}_{col:02}_{row:02}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<String> for PatchId {
    fn from(s: String) -> Self {
        PatchId(s)
    }
}

impl From<&str> for PatchId {
    fn from(s: &str) -> Self {
        PatchId(s.to_owned())
    }
}

impl fmt::Display for PatchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for PatchId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Square footprint of one patch within its parent tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchExtent {
    pub tile_id: String,
    pub col: u32,
    pub row: u32,
    /// Upper-left corner.
    pub origin_x: f64,
    pub origin_y: f64,
    pub size: f64,
    pub crs: String,
}

impl PatchExtent {
    /// Derives the footprint of grid cell `(col, row)` of `tile`.
    ///
    /// This is the only place patch origins are computed, so re-deriving an
    /// extent always reproduces the stored origin bit for bit.
    pub fn in_tile(tile: &TileExtent, col: u32, row: u32, size: f64) -> Self {
        Self {
            tile_id: tile.tile_id.clone(),
            col,
            row,
            origin_x: tile.origin_x + f64::from(col) * size,
            origin_y: tile.origin_y - f64::from(row) * size,
            size,
            crs: tile.crs.clone(),
        }
    }

    pub fn id(&self) -> PatchId {
        PatchId::new(&self.tile_id, self.col, self.row)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.origin_x + self.size / 2.0,
            self.origin_y - self.size / 2.0,
        )
    }

    pub fn min_x(&self) -> f64 {
        self.origin_x
    }

    pub fn max_x(&self) -> f64 {
        self.origin_x + self.size
    }

    pub fn min_y(&self) -> f64 {
        self.origin_y - self.size
    }

    pub fn max_y(&self) -> f64 {
        self.origin_y
    }
}
