//! Geometry, labeling and preprocessing for building a multi-modal,
//! multi-label remote-sensing patch archive.

pub mod labeling;
pub mod patch;
pub mod pipeline;
pub mod raster;
pub mod split;

pub use patch::{PatchExtent, PatchId, TileExtent};
pub use split::{assign_split, SplitGeometry, SplitTag};
