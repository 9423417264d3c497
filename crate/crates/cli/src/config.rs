//! Run configuration: defaults, then the TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use reben_core::labeling::{check_min_fraction, pixels_per_side, CoverageThreshold, DEFAULT_COVERAGE_THRESHOLD};
use reben_core::patch::DEFAULT_PATCH_SIZE_M;
use reben_core::pipeline::Modality;
use reben_core::split::frame_widths;

use crate::error::{AppError, AppResult};

/// One configuration layer. Every field is optional so layers can be merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    /// Patch side in meters [default: 1200]
    #[arg(long, global = true)]
    pub patch_size_m: Option<f64>,
    /// Reference map pixel size in meters [default: 10]
    #[arg(long, global = true)]
    pub resolution_m: Option<f64>,
    #[command(flatten)]
    #[serde(default)]
    pub split: SplitLayer,
    /// Minimum labeled fraction for a patch to be kept [default: 0.75]
    #[arg(long, global = true)]
    pub coverage_threshold: Option<f64>,
    /// A class is a label when its share of labeled pixels exceeds this [default: 0]
    #[arg(long, global = true)]
    pub min_label_fraction: Option<f64>,
    /// CSV mapping level-3 codes to classes [default: bundled table]
    #[arg(long, global = true)]
    pub nomenclature_path: Option<PathBuf>,
    /// S1, S2 or S1+S2 [default: S1+S2]
    #[arg(long, global = true)]
    pub modality: Option<Modality>,
    /// Directory of tiles, one subdirectory per tile
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Directory of GeoJSON land-cover polygon files
    #[arg(long, global = true)]
    pub polygons: Option<PathBuf>,
    /// Newline-delimited patch ids covered by seasonal snow
    #[arg(long, global = true)]
    pub snow_list: Option<PathBuf>,
    /// Newline-delimited patch ids covered by clouds or cloud shadow
    #[arg(long, global = true)]
    pub cloud_list: Option<PathBuf>,
    /// Output directory for the dataset, manifests and reports
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Seed for every random choice [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SplitLayer {
    /// Test area fraction [default: 0.25]
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Validation area fraction [default: 0.25]
    #[arg(long, global = true)]
    pub q: Option<f64>,
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> AppResult<Self> {
        toml::from_str(text).map_err(|e| AppError::usage(format!("config: {e}")))
    }

    pub fn from_path(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display()))
    }

    /// Fields set in `top` win over fields set in `self`.
    pub fn overlay(self, top: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            patch_size_m: top.patch_size_m.or(self.patch_size_m),
            resolution_m: top.resolution_m.or(self.resolution_m),
            split: SplitLayer {
                p: top.split.p.or(self.split.p),
                q: top.split.q.or(self.split.q),
            },
            coverage_threshold: top.coverage_threshold.or(self.coverage_threshold),
            min_label_fraction: top.min_label_fraction.or(self.min_label_fraction),
            nomenclature_path: top.nomenclature_path.or(self.nomenclature_path),
            modality: top.modality.or(self.modality),
            input: top.input.or(self.input),
            polygons: top.polygons.or(self.polygons),
            snow_list: top.snow_list.or(self.snow_list),
            cloud_list: top.cloud_list.or(self.cloud_list),
            out_dir: top.out_dir.or(self.out_dir),
            seed: top.seed.or(self.seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitParams {
    pub p: f64,
    pub q: f64,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub patch_size_m: f64,
    pub resolution_m: f64,
    pub split: SplitParams,
    pub coverage_threshold: f64,
    pub min_label_fraction: f64,
    pub nomenclature_path: Option<PathBuf>,
    pub modality: Modality,
    pub input: Option<PathBuf>,
    pub polygons: Option<PathBuf>,
    pub snow_list: Option<PathBuf>,
    pub cloud_list: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn resolve(layer: ConfigLayer) -> AppResult<Self> {
        let config = RunConfig {
            patch_size_m: layer.patch_size_m.unwrap_or(DEFAULT_PATCH_SIZE_M),
            resolution_m: layer.resolution_m.unwrap_or(10.0),
            split: SplitParams {
                p: layer.split.p.unwrap_or(0.25),
                q: layer.split.q.unwrap_or(0.25),
            },
            coverage_threshold: layer.coverage_threshold.unwrap_or(DEFAULT_COVERAGE_THRESHOLD),
            min_label_fraction: layer.min_label_fraction.unwrap_or(0.0),
            nomenclature_path: layer.nomenclature_path,
            modality: layer.modality.unwrap_or(Modality::S1S2),
            input: layer.input,
            polygons: layer.polygons,
            snow_list: layer.snow_list,
            cloud_list: layer.cloud_list,
            out_dir: layer.out_dir,
            seed: layer.seed.unwrap_or(0),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> AppResult<()> {
        if !(self.patch_size_m.is_finite() && self.patch_size_m > 0.0) {
            return Err(AppError::usage(format!("patch_size_m must be positive, got {}", self.patch_size_m)));
        }
        pixels_per_side(self.patch_size_m, self.resolution_m).map_err(|e| AppError::usage(e.to_string()))?;
        frame_widths(1.0, self.split.p, self.split.q).map_err(|e| AppError::usage(e.to_string()))?;
        CoverageThreshold::new(self.coverage_threshold).map_err(|e| AppError::usage(e.to_string()))?;
        check_min_fraction(self.min_label_fraction).map_err(|e| AppError::usage(e.to_string()))?;
        Ok(())
    }

    pub fn threshold(&self) -> CoverageThreshold {
        CoverageThreshold::new(self.coverage_threshold).expect("validated")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn out_dir(&self) -> AppResult<&Path> {
        self.out_dir.as_deref().ok_or_else(|| AppError::usage("--out-dir is required"))
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> AppResult<&'a Path> {
        value.as_deref().ok_or_else(|| AppError::usage(format!("--{flag} is required")))
    }
}
