use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::nomenclature::{ClassIndex, CLASS_NAMES, NUM_CLASSES};
use super::reference_map::{ReferenceMap, UNLABELED};
use super::LabelError;

/// Pixel counts per class plus the unlabeled count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassCounts {
    pub per_class: [u64; NUM_CLASSES],
    pub unlabeled: u64,
}

impl ClassCounts {
    pub fn of(map: &ReferenceMap) -> Self {
        let mut per_class = [0u64; NUM_CLASSES];
        let mut unlabeled = 0;
        for &v in map.values() {
            if v == UNLABELED {
                unlabeled += 1;
            } else {
                per_class[usize::from(v)] += 1;
            }
        }
        Self { per_class, unlabeled }
    }

    pub fn labeled(&self) -> u64 {
        self.per_class.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.labeled() + self.unlabeled
    }

    pub fn coverage(&self) -> Coverage {
        Coverage {
            labeled: self.labeled(),
            total: self.total(),
        }
    }
}

/// Labeled pixel count over total pixel count, kept as integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coverage {
    pub labeled: u64,
    pub total: u64,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.labeled as f64 / self.total as f64
        }
    }

    /// `labeled / total >= threshold`, decided exactly.
    pub fn at_least(&self, threshold: f64) -> bool {
        if self.total == 0 {
            return false;
        }
        ratio(self.labeled, self.total) >= exact(threshold)
    }
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite fraction")
}

/// Fraction of pixels carrying a class.
pub fn coverage_fraction(map: &ReferenceMap) -> f64 {
    ClassCounts::of(map).coverage().fraction()
}

/// Scene-level label set: one bit per class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct MultiLabelSet(u32);

impl MultiLabelSet {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn from_classes(classes: impl IntoIterator<Item = ClassIndex>) -> Self {
        let mut set = Self::empty();
        for c in classes {
            set.insert(c);
        }
        set
    }

    pub fn insert(&mut self, class: ClassIndex) {
        assert!(usize::from(class) < NUM_CLASSES, "class {class} out of range");
        self.0 |= 1 << class;
    }

    pub fn contains(&self, class: ClassIndex) -> bool {
        usize::from(class) < NUM_CLASSES && self.0 & (1 << class) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassIndex> + '_ {
        (0..NUM_CLASSES as ClassIndex).filter(|c| self.contains(*c))
    }

    pub fn bits(&self) -> [bool; NUM_CLASSES] {
        std::array::from_fn(|i| self.contains(i as ClassIndex))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.classes().map(|c| CLASS_NAMES[usize::from(c)]).collect()
    }
}

impl fmt::Display for MultiLabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.names().join(", "))
    }
}

// Serialized as the list of class names, as in the metadata sidecars.
impl Serialize for MultiLabelSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.names())
    }
}

impl<'de> Deserialize<'de> for MultiLabelSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(deserializer)?;
        names
            .iter()
            .map(|n| {
                super::nomenclature::class_by_name(n)
                    .ok_or_else(|| serde::de::Error::custom(format!("unknown class {n:?}")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::from_classes)
    }
}

/// Classes whose share of the labeled pixels exceeds `min_fraction`.
/// With the default `min_fraction = 0`, any pixel of a class sets its bit.
pub fn extract_multilabels(map: &ReferenceMap, min_fraction: f64) -> Result<MultiLabelSet, LabelError> {
    check_min_fraction(min_fraction)?;
    let counts = ClassCounts::of(map);
    let labeled = counts.labeled();
    if labeled == 0 {
        return Err(LabelError::NoLabeledPixels);
    }
    let mut set = MultiLabelSet::empty();
    if min_fraction == 0.0 {
        for (class, &n) in counts.per_class.iter().enumerate() {
            if n > 0 {
                set.insert(class as ClassIndex);
            }
        }
    } else {
        let threshold = exact(min_fraction);
        for (class, &n) in counts.per_class.iter().enumerate() {
            if n > 0 && ratio(n, labeled) > threshold {
                set.insert(class as ClassIndex);
            }
        }
    }
    Ok(set)
}

pub fn check_min_fraction(min_fraction: f64) -> Result<(), LabelError> {
    if min_fraction.is_finite() && (0.0..1.0).contains(&min_fraction) {
        Ok(())
    } else {
        Err(LabelError::InvalidFraction(min_fraction))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_with(counts: &[(u16, usize)], total: usize) -> ReferenceMap {
        let mut values = Vec::with_capacity(total);
        for &(class, n) in counts {
            values.extend(std::iter::repeat_n(class, n));
        }
        values.resize(total, UNLABELED);
        ReferenceMap::from_values(120, total / 120, values).unwrap()
    }

    #[test]
    fn coverage_values() {
        assert_eq!(coverage_fraction(&map_with(&[(3, 10_800)], 14_400)), 0.75);
        assert_eq!(coverage_fraction(&map_with(&[(3, 14_400)], 14_400)), 1.0);
        assert_eq!(coverage_fraction(&map_with(&[], 14_400)), 0.0);
    }

    #[test]
    fn exact_threshold_comparison() {
        let at = Coverage { labeled: 10_800, total: 14_400 };
        let below = Coverage { labeled: 10_799, total: 14_400 };
        assert!(at.at_least(0.75));
        assert!(!below.at_least(0.75));
        // 1/3 is not representable; the nearest double is below 1/3
        assert!(Coverage { labeled: 1, total: 3 }.at_least(1.0 / 3.0));
        assert!(!Coverage { labeled: 0, total: 0 }.at_least(0.5));
    }

    #[test]
    fn rare_class_threshold() {
        let map = map_with(&[(2, 14_399), (7, 1)], 14_400);
        let all = extract_multilabels(&map, 0.0).unwrap();
        assert_eq!(all.classes().collect::<Vec<_>>(), vec![2, 7]);
        let frequent = extract_multilabels(&map, 0.001).unwrap();
        assert_eq!(frequent.classes().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn share_is_relative_to_labeled_pixels() {
        // 10 of 20 labeled pixels: share 0.5 is not > 0.5
        let map = map_with(&[(0, 10), (1, 10)], 14_400);
        assert!(extract_multilabels(&map, 0.5).unwrap().is_empty());
        assert_eq!(extract_multilabels(&map, 0.49).unwrap().len(), 2);
    }

    #[test]
    fn errors() {
        assert_eq!(
            extract_multilabels(&map_with(&[], 14_400), 0.0),
            Err(LabelError::NoLabeledPixels)
        );
        let map = map_with(&[(0, 1)], 14_400);
        assert!(extract_multilabels(&map, 1.0).is_err());
        assert!(extract_multilabels(&map, -0.1).is_err());
    }

    #[test]
    fn label_set_json_uses_class_names() {
        let set = MultiLabelSet::from_classes([4, 0]);
        let json = serde_json::to_string(&set).unwrap();
        assert_eq!(json, r#"["Urban fabric","Pastures"]"#);
        assert_eq!(serde_json::from_str::<MultiLabelSet>(&json).unwrap(), set);
        assert!(serde_json::from_str::<MultiLabelSet>(r#"["Nope"]"#).is_err());
    }
}
