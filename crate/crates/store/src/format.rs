//! Tensor record byte format.
//!
//! ```text
//! [u64 LE header length N][N bytes JSON header][payload]
//! ```
//!
//! The header maps each tensor name to `{"dtype","shape","data_offsets"}`
//! with names in lexicographic order and offsets relative to the payload
//! start. The header is padded with spaces so the payload starts on an
//! 8-byte boundary. The layout is readable by safetensors decoders.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Largest header accepted by the decoder.
pub const MAX_HEADER_LEN: u64 = 1 << 20;
const LEN_PREFIX: usize = 8;
const METADATA_KEY: &str = "__metadata__";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("unsupported dtype {0:?}")]
    UnsupportedDtype(String),
    #[error("tensor {name}: shape {shape:?} needs {expected} bytes, buffer has {found}")]
    ShapeMismatch {
        name: String,
        shape: Vec<usize>,
        expected: usize,
        found: usize,
    },
    #[error("header length {0} exceeds the {MAX_HEADER_LEN} byte limit")]
    HeaderTooLarge(u64),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("duplicate tensor name {0:?}")]
    DuplicateName(String),
    #[error("tensor {0:?} overlaps or leaves a gap before the previous tensor")]
    OffsetOverlap(String),
    #[error("truncated: need {expected} bytes, have {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dtype {
    U8,
    U16,
    I16,
    I32,
    F32,
    F64,
}

impl Dtype {
    pub const ALL: [Dtype; 6] = [Dtype::U8, Dtype::U16, Dtype::I16, Dtype::I32, Dtype::F32, Dtype::F64];

    /// Element size in bytes.
    pub fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 | Dtype::I16 => 2,
            Dtype::I32 | Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::U8 => "U8",
            Dtype::U16 => "U16",
            Dtype::I16 => "I16",
            Dtype::I32 => "I32",
            Dtype::F32 => "F32",
            Dtype::F64 => "F64",
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dtype {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dtype::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| FormatError::UnsupportedDtype(s.to_owned()))
    }
}

fn byte_len(dtype: Dtype, shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(dtype.size(), |acc, &d| acc.checked_mul(d))
}

/// One n-dimensional array as little-endian bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    dtype: Dtype,
    shape: Vec<usize>,
    data: Vec<u8>,
}

macro_rules! typed_constructor {
    ($from:ident, $to:ident, $t:ty, $dtype:expr) => {
        pub fn $from(shape: Vec<usize>, values: &[$t]) -> Result<Self, FormatError> {
            Self::new($dtype, shape, values.iter().flat_map(|v| v.to_le_bytes()).collect())
        }

        /// Values, or `None` when the dtype differs.
        pub fn $to(&self) -> Option<Vec<$t>> {
            (self.dtype == $dtype).then(|| {
                self.data
                    .chunks_exact(std::mem::size_of::<$t>())
                    .map(|c| <$t>::from_le_bytes(c.try_into().unwrap()))
                    .collect()
            })
        }
    };
}

impl Tensor {
    pub fn new(dtype: Dtype, shape: Vec<usize>, data: Vec<u8>) -> Result<Self, FormatError> {
        check_len("", dtype, &shape, data.len())?;
        Ok(Self { dtype, shape, data })
    }

    typed_constructor!(from_u8, to_u8, u8, Dtype::U8);
    typed_constructor!(from_u16, to_u16, u16, Dtype::U16);
    typed_constructor!(from_i16, to_i16, i16, Dtype::I16);
    typed_constructor!(from_i32, to_i32, i32, Dtype::I32);
    typed_constructor!(from_f32, to_f32, f32, Dtype::F32);
    typed_constructor!(from_f64, to_f64, f64, Dtype::F64);

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn view(&self) -> TensorView<'_> {
        TensorView {
            dtype: self.dtype,
            shape: self.shape.clone(),
            data: &self.data,
        }
    }
}

fn check_len(name: &str, dtype: Dtype, shape: &[usize], found: usize) -> Result<(), FormatError> {
    match byte_len(dtype, shape) {
        Some(expected) if expected == found => Ok(()),
        expected => Err(FormatError::ShapeMismatch {
            name: name.to_owned(),
            shape: shape.to_vec(),
            expected: expected.unwrap_or(usize::MAX),
            found,
        }),
    }
}

/// Named tensors of one patch, kept in name order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TensorRecord {
    tensors: BTreeMap<String, Tensor>,
}

impl TensorRecord {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a tensor, returning the one it replaced.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Option<Tensor> {
        self.tensors.insert(name.into(), tensor)
    }

    pub fn with(mut self, name: impl Into<String>, tensor: Tensor) -> Self {
        self.insert(name, tensor);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }
}

impl FromIterator<(String, Tensor)> for TensorRecord {
    fn from_iter<I: IntoIterator<Item = (String, Tensor)>>(iter: I) -> Self {
        Self {
            tensors: iter.into_iter().collect(),
        }
    }
}

#[derive(Serialize)]
struct EntryOut<'a> {
    dtype: &'a str,
    shape: &'a [usize],
    data_offsets: [usize; 2],
}

pub fn encode_record(record: &TensorRecord) -> Vec<u8> {
    let mut header = BTreeMap::new();
    let mut offset = 0;
    for (name, t) in &record.tensors {
        let end = offset + t.data.len();
        header.insert(
            name.as_str(),
            EntryOut {
                dtype: t.dtype.as_str(),
                shape: &t.shape,
                data_offsets: [offset, end],
            },
        );
        offset = end;
    }
    let mut header = serde_json::to_vec(&header).expect("header serializes");
    let padded = header.len().next_multiple_of(LEN_PREFIX);
    header.resize(padded, b' ');

    let mut out = Vec::with_capacity(LEN_PREFIX + header.len() + offset);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for t in record.tensors.values() {
        out.extend_from_slice(&t.data);
    }
    out
}

/// A tensor borrowed from an encoded buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorView<'a> {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub data: &'a [u8],
}

impl TensorView<'_> {
    pub fn to_tensor(&self) -> Tensor {
        Tensor {
            dtype: self.dtype,
            shape: self.shape.clone(),
            data: self.data.to_vec(),
        }
    }
}

/// A decoded record that borrows its payload from the input buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordView<'a> {
    tensors: BTreeMap<String, TensorView<'a>>,
}

impl<'a> RecordView<'a> {
    pub fn get(&self, name: &str) -> Option<&TensorView<'a>> {
        self.tensors.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TensorView<'a>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn to_record(&self) -> TensorRecord {
        self.tensors.iter().map(|(k, v)| (k.clone(), v.to_tensor())).collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryIn {
    dtype: String,
    shape: Vec<usize>,
    data_offsets: [usize; 2],
}

/// Header entries in document order, duplicates kept so they can be reported.
struct RawHeader(Vec<(String, serde_json::Value)>);

impl<'de> Deserialize<'de> for RawHeader {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = RawHeader;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawHeader, A::Error> {
                let mut entries = Vec::new();
                while let Some(entry) = map.next_entry::<String, serde_json::Value>()? {
                    entries.push(entry);
                }
                Ok(RawHeader(entries))
            }
        }
        deserializer.deserialize_map(V)
    }
}

/// Decodes without copying tensor data.
pub fn decode_view(bytes: &[u8]) -> Result<RecordView<'_>, FormatError> {
    let prefix: [u8; LEN_PREFIX] = bytes
        .get(..LEN_PREFIX)
        .ok_or(FormatError::Truncated {
            expected: LEN_PREFIX,
            found: bytes.len(),
        })?
        .try_into()
        .unwrap();
    let n = u64::from_le_bytes(prefix);
    if n > MAX_HEADER_LEN {
        return Err(FormatError::HeaderTooLarge(n));
    }
    let payload_start = LEN_PREFIX + n as usize;
    let header_bytes = bytes.get(LEN_PREFIX..payload_start).ok_or(FormatError::Truncated {
        expected: payload_start,
        found: bytes.len(),
    })?;
    let payload = &bytes[payload_start..];

    let RawHeader(raw) =
        serde_json::from_slice(header_bytes).map_err(|e| FormatError::MalformedHeader(e.to_string()))?;

    let mut tensors = BTreeMap::new();
    let mut spans = Vec::with_capacity(raw.len());
    let mut seen_metadata = false;
    for (name, value) in raw {
        if name == METADATA_KEY {
            if seen_metadata {
                return Err(FormatError::DuplicateName(name));
            }
            seen_metadata = true;
            continue;
        }
        let entry: EntryIn =
            serde_json::from_value(value).map_err(|e| FormatError::MalformedHeader(format!("{name}: {e}")))?;
        let dtype: Dtype = entry.dtype.parse()?;
        let [begin, end] = entry.data_offsets;
        if end < begin {
            return Err(FormatError::MalformedHeader(format!("{name}: data_offsets [{begin}, {end}]")));
        }
        check_len(&name, dtype, &entry.shape, end - begin)?;
        if tensors.contains_key(&name) {
            return Err(FormatError::DuplicateName(name));
        }
        spans.push((begin, end, name.clone()));
        tensors.insert(
            name,
            TensorView {
                dtype,
                shape: entry.shape,
                data: &[],
            },
        );
    }

    spans.sort();
    let mut cursor = 0;
    for (begin, end, name) in &spans {
        if *begin != cursor {
            return Err(FormatError::OffsetOverlap(name.clone()));
        }
        cursor = *end;
    }
    if cursor > payload.len() {
        return Err(FormatError::Truncated {
            expected: payload_start + cursor,
            found: bytes.len(),
        });
    }
    if cursor < payload.len() {
        return Err(FormatError::TrailingBytes(payload.len() - cursor));
    }
    for (begin, end, name) in spans {
        tensors.get_mut(&name).unwrap().data = &payload[begin..end];
    }
    Ok(RecordView { tensors })
}

pub fn decode_record(bytes: &[u8]) -> Result<TensorRecord, FormatError> {
    decode_view(bytes).map(|v| v.to_record())
}
