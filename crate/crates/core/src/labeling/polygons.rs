//! Land-cover polygon input.
//!
//! Polygons are read from GeoJSON feature collections. Each feature carries a
//! `Polygon` or `MultiPolygon` geometry in the projected CRS of the patches
//! and a `CODE_18` property holding the CORINE level-3 code, as a string
//! (`"231"`) or a number. The CRS is declared with the legacy named-CRS
//! member:
//!
//! ```json
//! {"type": "FeatureCollection",
//!  "crs": {"type": "name", "properties": {"name": "EPSG:32632"}},
//!  "features": [...]}
//! ```

use std::path::Path;
use std::str::FromStr;

use geojson::{FeatureCollection, GeometryValue, JsonValue};

use super::LabelError;

/// Property holding the level-3 code.
pub const CODE_PROPERTY: &str = "CODE_18";

/// One polygon: exterior ring followed by holes. Rings are open (the closing
/// vertex is dropped) and filled with the even-odd rule.
#[derive(Debug, Clone, PartialEq)]
pub struct LandCoverPolygon {
    pub rings: Vec<Vec<(f64, f64)>>,
    pub code: u16,
}

impl LandCoverPolygon {
    pub fn new(rings: Vec<Vec<(f64, f64)>>, code: u16) -> Result<Self, LabelError> {
        let rings = rings
            .into_iter()
            .map(normalize_ring)
            .collect::<Result<Vec<_>, _>>()?;
        if rings.is_empty() {
            return Err(LabelError::Geometry("polygon has no rings".into()));
        }
        Ok(Self { rings, code })
    }

    /// Axis-aligned rectangle `[min_x, max_x] x [min_y, max_y]`.
    pub fn rectangle(min_x: f64, min_y: f64, max_x: f64, max_y: f64, code: u16) -> Self {
        Self::new(
            vec![vec![(min_x, min_y), (max_x, min_y), (max_x, max_y), (min_x, max_y)]],
            code,
        )
        .expect("rectangle is a valid ring")
    }

    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.rings[0].iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(x, y)| (a.min(x), b.min(y), c.max(x), d.max(y)),
        )
    }
}

fn normalize_ring(mut ring: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>, LabelError> {
    if ring.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(LabelError::Geometry("non-finite coordinate".into()));
    }
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring.dedup();
    if ring.len() < 3 {
        return Err(LabelError::Geometry(format!("ring has {} distinct vertices", ring.len())));
    }
    Ok(ring)
}

/// Polygons of one land-cover map, in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandCoverPolygonSet {
    pub crs: Option<String>,
    pub polygons: Vec<LandCoverPolygon>,
}

impl LandCoverPolygonSet {
    pub fn new(crs: impl Into<String>, polygons: Vec<LandCoverPolygon>) -> Self {
        Self {
            crs: Some(crs.into()),
            polygons,
        }
    }

    pub fn from_geojson_str(text: &str) -> Result<Self, LabelError> {
        let fc = FeatureCollection::from_str(text).map_err(|e| LabelError::Vector(e.to_string()))?;
        let crs = fc
            .foreign_members
            .as_ref()
            .and_then(|m| m.get("crs"))
            .map(parse_crs)
            .transpose()?;
        let mut polygons = Vec::new();
        for (i, feature) in fc.features.into_iter().enumerate() {
            let code = feature
                .properties
                .as_ref()
                .and_then(|p| p.get(CODE_PROPERTY))
                .ok_or_else(|| LabelError::Vector(format!("feature {i} has no {CODE_PROPERTY}")))
                .and_then(|v| parse_code(v).ok_or_else(|| LabelError::Vector(format!("feature {i}: bad {CODE_PROPERTY} {v}"))))?;
            let Some(geometry) = feature.geometry else {
                return Err(LabelError::Vector(format!("feature {i} has no geometry")));
            };
            match geometry.value {
                GeometryValue::Polygon { coordinates } => {
                    polygons.push(LandCoverPolygon::new(rings_of(coordinates), code)?);
                }
                GeometryValue::MultiPolygon { coordinates } => {
                    for poly in coordinates {
                        polygons.push(LandCoverPolygon::new(rings_of(poly), code)?);
                    }
                }
                _ => {
                    return Err(LabelError::Vector(format!(
                        "feature {i}: only Polygon and MultiPolygon geometries are supported"
                    )))
                }
            }
        }
        Ok(Self { crs, polygons })
    }

    /// Loads every `*.geojson` / `*.json` file in `dir`, in file-name order.
    /// All files must declare the same CRS.
    pub fn from_dir(dir: &Path) -> Result<Self, LabelError> {
        let mut files: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && matches!(p.extension().and_then(|e| e.to_str()), Some("geojson") | Some("json"))
            })
            .collect();
        files.sort();
        let mut set = LandCoverPolygonSet::default();
        for (i, path) in files.iter().enumerate() {
            let text = std::fs::read_to_string(path)?;
            let part = Self::from_geojson_str(&text)
                .map_err(|e| LabelError::Vector(format!("{}: {e}", path.display())))?;
            if i > 0 && part.crs != set.crs {
                return Err(LabelError::CrsMismatch {
                    expected: set.crs.unwrap_or_else(|| "none".into()),
                    found: part.crs.unwrap_or_else(|| "none".into()),
                });
            }
            set.crs = part.crs;
            set.polygons.extend(part.polygons);
        }
        Ok(set)
    }
}

fn rings_of(coordinates: Vec<Vec<geojson::Position>>) -> Vec<Vec<(f64, f64)>> {
    coordinates
        .into_iter()
        .map(|ring| ring.into_iter().map(|p| (p[0], p[1])).collect())
        .collect()
}

fn parse_code(v: &JsonValue) -> Option<u16> {
    match v {
        JsonValue::String(s) => s.trim().parse().ok(),
        JsonValue::Number(n) => n.as_u64().and_then(|n| u16::try_from(n).ok()),
        _ => None,
    }
}

fn parse_crs(v: &JsonValue) -> Result<String, LabelError> {
    let name = v
        .get("properties")
        .and_then(|p| p.get("name"))
        .and_then(JsonValue::as_str)
        .ok_or_else(|| LabelError::Vector(format!("unsupported crs member {v}")))?;
    Ok(normalize_crs(name))
}

/// Reduces `urn:ogc:def:crs:EPSG::32632` style names to `EPSG:32632`.
pub fn normalize_crs(name: &str) -> String {
    if let Some(rest) = name.strip_prefix("urn:ogc:def:crs:") {
        let mut parts = rest.split(':').filter(|s| !s.is_empty());
        if let (Some(authority), Some(code)) = (parts.next(), parts.last()) {
            return format!("{authority}:{code}");
        }
    }
    name.to_owned()
}
