use serde::{Deserialize, Serialize};

use super::bands::PatchPixels;

/// Per-patch flags. Snow and cloud flags come from external lists; the
/// invalid-data flag from the band nodata masks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchFlags {
    pub snow: bool,
    pub cloud_or_shadow: bool,
    pub has_invalid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    /// Part of the dataset.
    Main,
    /// Kept, but listed in the snow/cloud file.
    AuxiliaryList,
    /// Not part of the dataset.
    Dropped,
}

impl PatchFlags {
    /// Invalid data dominates snow and cloud.
    pub fn disposition(&self) -> Disposition {
        if self.has_invalid {
            Disposition::Dropped
        } else if self.snow || self.cloud_or_shadow {
            Disposition::AuxiliaryList
        } else {
            Disposition::Main
        }
    }
}

/// Disposition of a patch. Nodata pixels in any band count as invalid even
/// when the upstream flag is unset.
pub fn screen_patch(pixels: &PatchPixels, flags: &PatchFlags) -> Disposition {
    PatchFlags {
        has_invalid: flags.has_invalid || pixels.has_invalid(),
        ..*flags
    }
    .disposition()
}
