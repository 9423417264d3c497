use std::ops::{Add, AddAssign};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::screening::{Disposition, PatchFlags};
use crate::labeling::{MultiLabelSet, CLASS_NAMES, NUM_CLASSES};
use crate::patch::PatchId;
use crate::split::SplitTag;

/// What the stats fold needs to know about one patch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchRecord {
    pub id: PatchId,
    pub split: SplitTag,
    pub labels: MultiLabelSet,
    pub flags: PatchFlags,
}

/// Per-class, per-split counts of main-set patches carrying each label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DatasetStats {
    counts: [[u64; 3]; NUM_CLASSES],
    patches: [u64; 3],
}

impl DatasetStats {
    pub fn add_record(&mut self, record: &PatchRecord) {
        if record.flags.disposition() != Disposition::Main {
            return;
        }
        let split = record.split.index();
        self.patches[split] += 1;
        for class in record.labels.classes() {
            self.counts[usize::from(class)][split] += 1;
        }
    }

    pub fn count(&self, class: usize, split: SplitTag) -> u64 {
        self.counts[class][split.index()]
    }

    pub fn class_total(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Number of main-set patches per split.
    pub fn patches(&self, split: SplitTag) -> u64 {
        self.patches[split.index()]
    }
}

pub fn dataset_stats<'a>(records: impl IntoIterator<Item = &'a PatchRecord>) -> DatasetStats {
    let mut stats = DatasetStats::default();
    for r in records {
        stats.add_record(r);
    }
    stats
}

impl AddAssign for DatasetStats {
    fn add_assign(&mut self, rhs: Self) {
        for (row, other) in self.counts.iter_mut().zip(rhs.counts.iter()) {
            for (a, b) in row.iter_mut().zip(other) {
                *a += b;
            }
        }
        for (a, b) in self.patches.iter_mut().zip(rhs.patches) {
            *a += b;
        }
    }
}

impl Add for DatasetStats {
    type Output = DatasetStats;

    fn add(mut self, rhs: Self) -> Self::Output {
        self += rhs;
        self
    }
}

impl std::iter::Sum for DatasetStats {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(DatasetStats::default(), Add::add)
    }
}

#[derive(Serialize)]
struct ClassRow<'a> {
    class: &'a str,
    train: u64,
    validation: u64,
    test: u64,
    total: u64,
}

impl Serialize for DatasetStats {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<ClassRow> = (0..NUM_CLASSES)
            .map(|c| ClassRow {
                class: CLASS_NAMES[c],
                train: self.counts[c][0],
                validation: self.counts[c][1],
                test: self.counts[c][2],
                total: self.class_total(c),
            })
            .collect();
        let mut s = serializer.serialize_struct("DatasetStats", 2)?;
        s.serialize_field(
            "patches",
            &serde_json::json!({
                "train": self.patches[0],
                "validation": self.patches[1],
                "test": self.patches[2],
            }),
        )?;
        s.serialize_field("classes", &rows)?;
        s.end()
    }
}
