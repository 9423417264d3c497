//! Band bookkeeping and model-input preparation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, Array3};
use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Sentinel-2 bands with their native resolution in meters.
pub const S2_BANDS: [(&str, f64); 12] = [
    ("B01", 60.0),
    ("B02", 10.0),
    ("B03", 10.0),
    ("B04", 10.0),
    ("B05", 20.0),
    ("B06", 20.0),
    ("B07", 20.0),
    ("B08", 10.0),
    ("B8A", 20.0),
    ("B09", 60.0),
    ("B11", 20.0),
    ("B12", 20.0),
];

/// Sentinel-1 polarizations, delivered on the 10 m grid.
pub const S1_BANDS: [(&str, f64); 2] = [("VV", 10.0), ("VH", 10.0)];

/// Channel order of the stacked model input. The 60 m bands B01 and B09
/// are not used.
pub const S2_MODEL_BANDS: [&str; 10] = ["B02", "B03", "B04", "B05", "B06", "B07", "B08", "B8A", "B11", "B12"];
pub const S1_MODEL_BANDS: [&str; 2] = ["VV", "VH"];

/// Grid the model input is resampled to.
pub const MODEL_RESOLUTION_M: f64 = 10.0;

pub fn band_resolution(name: &str) -> Option<f64> {
    S2_BANDS.iter().chain(S1_BANDS.iter()).find(|(n, _)| *n == name).map(|(_, r)| *r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    S1,
    S2,
    #[serde(rename = "S1+S2")]
    S1S2,
}

impl Modality {
    /// Bands fed to the model, in channel order.
    pub fn model_bands(self) -> Vec<&'static str> {
        match self {
            Modality::S1 => S1_MODEL_BANDS.to_vec(),
            Modality::S2 => S2_MODEL_BANDS.to_vec(),
            Modality::S1S2 => S2_MODEL_BANDS.iter().chain(S1_MODEL_BANDS.iter()).copied().collect(),
        }
    }

    /// Every band of the modality, including the 60 m ones.
    pub fn all_bands(self) -> Vec<(&'static str, f64)> {
        match self {
            Modality::S1 => S1_BANDS.to_vec(),
            Modality::S2 => S2_BANDS.to_vec(),
            Modality::S1S2 => S2_BANDS.iter().chain(S1_BANDS.iter()).copied().collect(),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::S1 => "S1",
            Modality::S2 => "S2",
            Modality::S1S2 => "S1+S2",
        })
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S1" | "s1" => Ok(Modality::S1),
            "S2" | "s2" => Ok(Modality::S2),
            "S1+S2" | "s1+s2" | "S1S2" => Ok(Modality::S1S2),
            other => Err(format!("unknown modality {other:?}, expected S1, S2 or S1+S2")),
        }
    }
}

/// One band of a patch at its native resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    pub resolution: f64,
    pub data: Array2<u16>,
    pub nodata: Option<u16>,
}

impl Band {
    pub fn new(name: impl Into<String>, resolution: f64, data: Array2<u16>) -> Self {
        Self {
            name: name.into(),
            resolution,
            data,
            nodata: None,
        }
    }

    pub fn with_nodata(mut self, nodata: Option<u16>) -> Self {
        self.nodata = nodata;
        self
    }

    /// `true` where the pixel holds the nodata value.
    pub fn nodata_mask(&self) -> Array2<bool> {
        match self.nodata {
            Some(nd) => self.data.mapv(|v| v == nd),
            None => Array2::from_elem(self.data.raw_dim(), false),
        }
    }

    pub fn has_nodata(&self) -> bool {
        self.nodata.is_some_and(|nd| self.data.iter().any(|&v| v == nd))
    }
}

/// All bands of one patch, covering the same footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPixels {
    patch_size: f64,
    bands: BTreeMap<String, Band>,
}

impl PatchPixels {
    pub fn new(patch_size: f64) -> Self {
        Self {
            patch_size,
            bands: BTreeMap::new(),
        }
    }

    /// Adds a band, checking that its shape matches `patch_size / resolution`.
    pub fn insert(&mut self, band: Band) -> Result<(), PipelineError> {
        let side = self.patch_size / band.resolution;
        let (rows, cols) = band.data.dim();
        if side.fract() != 0.0 || rows as f64 != side || cols as f64 != side {
            return Err(PipelineError::BandShape {
                band: band.name,
                expected: side,
                rows,
                cols,
            });
        }
        self.bands.insert(band.name.clone(), band);
        Ok(())
    }

    pub fn with_band(mut self, band: Band) -> Result<Self, PipelineError> {
        self.insert(band)?;
        Ok(self)
    }

    pub fn patch_size(&self) -> f64 {
        self.patch_size
    }

    pub fn band(&self, name: &str) -> Option<&Band> {
        self.bands.get(name)
    }

    pub fn bands(&self) -> impl Iterator<Item = &Band> {
        self.bands.values()
    }

    pub fn has_invalid(&self) -> bool {
        self.bands.values().any(Band::has_nodata)
    }
}

/// Replicates every pixel into a `factor x factor` block.
pub fn upsample_nearest(src: &Array2<u16>, factor: usize) -> Array2<u16> {
    let (rows, cols) = src.dim();
    Array2::from_shape_fn((rows * factor, cols * factor), |(r, c)| src[[r / factor, c / factor]])
}

/// Stacked `channels x H x W` model input with its channel names.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub channels: Vec<String>,
    pub data: Array3<u16>,
}

/// Stacks the model bands of `modality` on the 10 m grid. Coarser bands are
/// upsampled by nearest neighbour.
pub fn prepare_model_input(pixels: &PatchPixels, modality: Modality) -> Result<ModelInput, PipelineError> {
    let side = pixels.patch_size / MODEL_RESOLUTION_M;
    if side.fract() != 0.0 || side < 1.0 {
        return Err(PipelineError::BandShape {
            band: "model grid".into(),
            expected: side,
            rows: 0,
            cols: 0,
        });
    }
    let side = side as usize;
    let names = modality.model_bands();
    let mut data = Array3::zeros((names.len(), side, side));
    for (channel, name) in names.iter().enumerate() {
        let band = pixels
            .band(name)
            .ok_or_else(|| PipelineError::MissingBand((*name).to_owned()))?;
        let factor = band.resolution / MODEL_RESOLUTION_M;
        if factor.fract() != 0.0 || factor < 1.0 {
            return Err(PipelineError::BandShape {
                band: band.name.clone(),
                expected: side as f64 / factor,
                rows: band.data.nrows(),
                cols: band.data.ncols(),
            });
        }
        let mut slot = data.slice_mut(s![channel, .., ..]);
        if factor == 1.0 {
            slot.assign(&band.data);
        } else {
            slot.assign(&upsample_nearest(&band.data, factor as usize));
        }
    }
    Ok(ModelInput {
        channels: names.iter().map(|n| (*n).to_owned()).collect(),
        data,
    })
}
