use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Indicators a tile must pass to be tiled. Any other indicator in a report
/// is advisory and only logged when false.
pub const MANDATORY_INDICATORS: [&str; 2] = ["radiometric_ok", "geometric_ok"];

/// Quality indicators of one tile, as read from its JSON report:
/// `{"tile_id": "...", "radiometric_ok": true, "geometric_ok": true, ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileQualityReport {
    pub tile_id: String,
    #[serde(flatten)]
    pub indicators: BTreeMap<String, bool>,
}

impl TileQualityReport {
    pub fn new(tile_id: impl Into<String>, radiometric_ok: bool, geometric_ok: bool) -> Self {
        let indicators = BTreeMap::from([
            ("radiometric_ok".to_owned(), radiometric_ok),
            ("geometric_ok".to_owned(), geometric_ok),
        ]);
        Self {
            tile_id: tile_id.into(),
            indicators,
        }
    }

    pub fn with_flag(mut self, name: impl Into<String>, ok: bool) -> Self {
        self.indicators.insert(name.into(), ok);
        self
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::QualityReport(e.to_string()))
    }

    pub fn radiometric_ok(&self) -> Option<bool> {
        self.indicators.get("radiometric_ok").copied()
    }

    pub fn geometric_ok(&self) -> Option<bool> {
        self.indicators.get("geometric_ok").copied()
    }

    pub fn other_flags(&self) -> impl Iterator<Item = (&str, bool)> {
        self.indicators
            .iter()
            .filter(|(k, _)| !MANDATORY_INDICATORS.contains(&k.as_str()))
            .map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum QualityVerdict {
    Pass,
    Fail { failed: Vec<String> },
}

impl QualityVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, QualityVerdict::Pass)
    }
}

pub fn check_quality(report: &TileQualityReport) -> Result<QualityVerdict, PipelineError> {
    let mut failed = Vec::new();
    for name in MANDATORY_INDICATORS {
        match report.indicators.get(name) {
            None => {
                return Err(PipelineError::MissingIndicator {
                    tile_id: report.tile_id.clone(),
                    indicator: name.to_owned(),
                })
            }
            Some(false) => failed.push(name.to_owned()),
            Some(true) => {}
        }
    }
    for (name, ok) in report.other_flags() {
        if !ok {
            warn!("tile {}: advisory indicator {name} is false", report.tile_id);
        }
    }
    Ok(if failed.is_empty() {
        QualityVerdict::Pass
    } else {
        QualityVerdict::Fail { failed }
    })
}

/// Tiles split by verdict, in input order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct QualityGate {
    pub passed: Vec<String>,
    pub failed: Vec<String>,
}

pub fn gate_tiles<'a>(
    reports: impl IntoIterator<Item = &'a TileQualityReport>,
) -> Result<QualityGate, PipelineError> {
    let mut gate = QualityGate::default();
    for report in reports {
        if check_quality(report)?.passed() {
            gate.passed.push(report.tile_id.clone());
        } else {
            gate.failed.push(report.tile_id.clone());
        }
    }
    Ok(gate)
}
