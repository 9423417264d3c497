//! Tile quality gate, tiling, screening, model-input preparation and
//! dataset statistics.

use thiserror::Error;

pub mod bands;
pub mod quality;
pub mod screening;
pub mod stats;
mod tiling;

pub use bands::{
    band_resolution, prepare_model_input, upsample_nearest, Band, Modality, ModelInput, PatchPixels,
    MODEL_RESOLUTION_M, S1_BANDS, S1_MODEL_BANDS, S2_BANDS, S2_MODEL_BANDS,
};
pub use quality::{check_quality, gate_tiles, QualityGate, QualityVerdict, TileQualityReport, MANDATORY_INDICATORS};
pub use screening::{screen_patch, Disposition, PatchFlags};
pub use stats::{dataset_stats, DatasetStats, PatchRecord};
pub use tiling::tile_to_patches;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("quality report: {0}")]
    QualityReport(String),
    #[error("tile {tile_id}: missing quality indicator {indicator}")]
    MissingIndicator { tile_id: String, indicator: String },
    #[error("missing band {0}")]
    MissingBand(String),
    #[error("band {band}: expected {expected} x {expected} pixels, got {rows} x {cols}")]
    BandShape {
        band: String,
        expected: f64,
        rows: usize,
        cols: usize,
    },
}
