//! Pixel-level reference maps and scene-level multi-labels.

mod multilabel;
mod nomenclature;
mod polygons;
mod reference_map;
mod retention;

use thiserror::Error;

pub use multilabel::{
    check_min_fraction, coverage_fraction, extract_multilabels, ClassCounts, Coverage, MultiLabelSet,
};
pub use nomenclature::{
    class_by_name, ClassIndex, ClassNomenclature, CLASS_NAMES, CLC_LEVEL3_CODES, NUM_CLASSES,
};
pub use polygons::{normalize_crs, LandCoverPolygon, LandCoverPolygonSet, CODE_PROPERTY};
pub use reference_map::{
    pixels_per_side, rasterize_reference_map, rasterize_with_diagnostics, Rasterized, ReferenceMap,
    UNLABELED,
};
pub use retention::{
    retention_decision, CoverageThreshold, RetentionDecision, RetentionReason, DEFAULT_COVERAGE_THRESHOLD,
};

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("CRS mismatch: patch is {expected}, polygons are {found}")]
    CrsMismatch { expected: String, found: String },
    #[error("patch size {size} m is not a whole number of {resolution} m pixels")]
    NonIntegerGrid { size: f64, resolution: f64 },
    #[error("reference map has no labeled pixels")]
    NoLabeledPixels,
    #[error("fraction out of range: {0}")]
    InvalidFraction(f64),
    #[error("nomenclature table: {0}")]
    Nomenclature(String),
    #[error("invalid polygon: {0}")]
    Geometry(String),
    #[error("vector input: {0}")]
    Vector(String),
    #[error("reference map: {0}")]
    Raster(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabelError {
    fn from(e: std::io::Error) -> Self {
        LabelError::Io(e.to_string())
    }
}
