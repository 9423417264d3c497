use crate::patch::{PatchExtent, TileExtent};

/// Cuts `tile` into a grid of `floor(s / patch_size)^2` patches anchored at
/// the tile's upper-left corner. The east and south margins left over by the
/// floor division are not patched.
///
/// Patches are ordered row-major.
pub fn tile_to_patches(tile: &TileExtent, patch_size: f64) -> Vec<PatchExtent> {
    if !(patch_size.is_finite() && patch_size > 0.0) {
        return Vec::new();
    }
    let per_side = (tile.size / patch_size).floor() as u32;
    let mut patches = Vec::with_capacity((per_side as usize).pow(2));
    for row in 0..per_side {
        for col in 0..per_side {
            patches.push(PatchExtent::in_tile(tile, col, row, patch_size));
        }
    }
    patches
}
