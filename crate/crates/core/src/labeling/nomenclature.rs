//! CORINE level-3 code to 19-class mapping.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use super::LabelError;

/// Number of classes in the nomenclature.
pub const NUM_CLASSES: usize = 19;

/// Class index type; values are `0..NUM_CLASSES`.
pub type ClassIndex = u8;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "Urban fabric",
    "Industrial or commercial units",
    "Arable land",
    "Permanent crops",
    "Pastures",
    "Complex cultivation patterns",
    "Land principally occupied by agriculture, with significant areas of natural vegetation",
    "Agro-forestry areas",
    "Broad-leaved forest",
    "Coniferous forest",
    "Mixed forest",
    "Natural grassland and sparsely vegetated areas",
    "Moors, heathland and sclerophyllous vegetation",
    "Transitional woodland, shrub",
    "Beaches, dunes, sands",
    "Inland wetlands",
    "Coastal wetlands",
    "Inland waters",
    "Marine waters",
];

/// The 44 CORINE Land Cover level-3 codes.
pub const CLC_LEVEL3_CODES: [u16; 44] = [
    111, 112, 121, 122, 123, 124, 131, 132, 133, 141, 142, 211, 212, 213, 221, 222, 223, 231, 241,
    242, 243, 244, 311, 312, 313, 321, 322, 323, 324, 331, 332, 333, 334, 335, 411, 412, 421, 422,
    423, 511, 512, 521, 522, 523,
];

const DEFAULT_TABLE: &str = include_str!("../../data/clc_level3_to_19.csv");

/// Looks up a class index by its display name.
pub fn class_by_name(name: &str) -> Option<ClassIndex> {
    CLASS_NAMES.iter().position(|n| *n == name).map(|i| i as ClassIndex)
}

/// Mapping from level-3 codes to class indices. Immutable once loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassNomenclature {
    mapping: BTreeMap<u16, Option<ClassIndex>>,
}

impl Default for ClassNomenclature {
    fn default() -> Self {
        Self::from_csv_reader(DEFAULT_TABLE.as_bytes()).expect("bundled nomenclature table is valid")
    }
}

impl ClassNomenclature {
    pub fn from_path(path: &Path) -> Result<Self, LabelError> {
        let file = std::fs::File::open(path)
            .map_err(|e| LabelError::Nomenclature(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    /// Parses a two-column CSV of `code,class` rows where `class` is an index
    /// or `-` for codes outside the nomenclature. A leading header row is
    /// skipped.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, LabelError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut mapping = BTreeMap::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| LabelError::Nomenclature(e.to_string()))?;
            if record.len() != 2 {
                return Err(LabelError::Nomenclature(format!(
                    "row {}: expected 2 columns, got {}",
                    line + 1,
                    record.len()
                )));
            }
            let Ok(code) = record[0].parse::<u16>() else {
                if line == 0 {
                    continue;
                }
                return Err(LabelError::Nomenclature(format!(
                    "row {}: bad code {:?}",
                    line + 1,
                    &record[0]
                )));
            };
            let class = match &record[1] {
                "-" => None,
                s => match s.parse::<usize>() {
                    Ok(i) if i < NUM_CLASSES => Some(i as ClassIndex),
                    _ => {
                        return Err(LabelError::Nomenclature(format!(
                            "row {}: class must be 0..{} or '-', got {s:?}",
                            line + 1,
                            NUM_CLASSES - 1
                        )))
                    }
                },
            };
            if mapping.insert(code, class).is_some() {
                return Err(LabelError::Nomenclature(format!("code {code} listed twice")));
            }
        }
        let table = Self { mapping };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<(), LabelError> {
        if let Some(code) = CLC_LEVEL3_CODES.iter().find(|c| !self.mapping.contains_key(c)) {
            return Err(LabelError::Nomenclature(format!("level-3 code {code} is not listed")));
        }
        let mut hit = [false; NUM_CLASSES];
        for class in self.mapping.values().flatten() {
            hit[*class as usize] = true;
        }
        if let Some(missing) = hit.iter().position(|h| !h) {
            return Err(LabelError::Nomenclature(format!("no code maps to class {missing}")));
        }
        Ok(())
    }

    /// Class for `code`; `None` for unmapped and unknown codes.
    pub fn class_of(&self, code: u16) -> Option<ClassIndex> {
        self.mapping.get(&code).copied().flatten()
    }

    pub fn codes(&self) -> impl Iterator<Item = (u16, Option<ClassIndex>)> + '_ {
        self.mapping.iter().map(|(c, i)| (*c, *i))
    }
}
