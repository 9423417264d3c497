use serde::{Deserialize, Serialize};

use super::multilabel::ClassCounts;
use super::reference_map::ReferenceMap;
use super::LabelError;

/// Default minimum labeled-pixel share for keeping a patch.
pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.75;

/// A coverage threshold in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CoverageThreshold(f64);

impl CoverageThreshold {
    pub fn new(t: f64) -> Result<Self, LabelError> {
        if t.is_finite() && t > 0.0 && t <= 1.0 {
            Ok(Self(t))
        } else {
            Err(LabelError::InvalidFraction(t))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for CoverageThreshold {
    fn default() -> Self {
        Self(DEFAULT_COVERAGE_THRESHOLD)
    }
}

impl TryFrom<f64> for CoverageThreshold {
    type Error = LabelError;

    fn try_from(t: f64) -> Result<Self, Self::Error> {
        Self::new(t)
    }
}

impl From<CoverageThreshold> for f64 {
    fn from(t: CoverageThreshold) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetentionReason {
    Kept,
    NoLabels,
    LowCoverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionDecision {
    pub keep: bool,
    pub coverage: f64,
    pub reason: RetentionReason,
}

/// Keeps a patch unless it has no labeled pixel or less than `threshold` of
/// its pixels are labeled. A patch exactly at the threshold is kept.
pub fn retention_decision(map: &ReferenceMap, threshold: CoverageThreshold) -> RetentionDecision {
    let coverage = ClassCounts::of(map).coverage();
    let reason = if coverage.labeled == 0 {
        RetentionReason::NoLabels
    } else if !coverage.at_least(threshold.get()) {
        RetentionReason::LowCoverage
    } else {
        RetentionReason::Kept
    };
    RetentionDecision {
        keep: reason == RetentionReason::Kept,
        coverage: coverage.fraction(),
        reason,
    }
}
