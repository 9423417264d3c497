//! Single-band 16-bit GeoTIFF input and output.
//!
//! Only what the pipeline needs: one unsigned 16-bit band, north-up
//! georeferencing through `ModelPixelScale` + `ModelTiepoint`, the EPSG code
//! from the GeoKey directory, and the GDAL nodata tag.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use thiserror::Error;
use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype::Gray16, TiffEncoder};
use tiff::tags::Tag;

use crate::patch::{ExtentError, TileExtent};

const GT_MODEL_TYPE: u16 = 1024;
const GT_RASTER_TYPE: u16 = 1025;
const GEOGRAPHIC_TYPE: u16 = 2048;
const PROJECTED_CS_TYPE: u16 = 3072;
const MODEL_TYPE_PROJECTED: u16 = 1;
const MODEL_TYPE_GEOGRAPHIC: u16 = 2;
const RASTER_PIXEL_IS_AREA: u16 = 1;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("window {col},{row} {width}x{height} exceeds raster {raster_width}x{raster_height}")]
    Window {
        col: usize,
        row: usize,
        width: usize,
        height: usize,
        raster_width: usize,
        raster_height: usize,
    },
    #[error(transparent)]
    Extent(#[from] ExtentError),
}

/// One georeferenced band held in memory, row-major from the north edge.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoRaster {
    pub width: usize,
    pub height: usize,
    /// Upper-left corner.
    pub origin_x: f64,
    pub origin_y: f64,
    /// Square pixel side in meters.
    pub pixel_size: f64,
    /// `EPSG:<code>` when the file declares one.
    pub crs: Option<String>,
    pub nodata: Option<u16>,
    pub data: Vec<u16>,
}

impl GeoRaster {
    pub fn get(&self, col: usize, row: usize) -> u16 {
        self.data[row * self.width + col]
    }

    /// Square footprint of the raster.
    pub fn tile_extent(&self, tile_id: &str) -> Result<TileExtent, RasterError> {
        let width_m = self.width as f64 * self.pixel_size;
        let height_m = self.height as f64 * self.pixel_size;
        let extent = TileExtent::from_bounds(
            tile_id,
            self.origin_x,
            self.origin_y - height_m,
            self.origin_x + width_m,
            self.origin_y,
            self.crs.clone().unwrap_or_default(),
        )?;
        Ok(extent)
    }

    /// Copies the pixel window starting at `(col, row)`.
    pub fn window(&self, col: usize, row: usize, width: usize, height: usize) -> Result<GeoRaster, RasterError> {
        if col + width > self.width || row + height > self.height {
            return Err(RasterError::Window {
                col,
                row,
                width,
                height,
                raster_width: self.width,
                raster_height: self.height,
            });
        }
        let mut data = Vec::with_capacity(width * height);
        for r in row..row + height {
            let start = r * self.width + col;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Ok(GeoRaster {
            width,
            height,
            origin_x: self.origin_x + col as f64 * self.pixel_size,
            origin_y: self.origin_y - row as f64 * self.pixel_size,
            pixel_size: self.pixel_size,
            crs: self.crs.clone(),
            nodata: self.nodata,
            data,
        })
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> RasterError {
    RasterError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> RasterError {
    RasterError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn tiff_err(path: &Path, e: tiff::TiffError) -> RasterError {
    match e {
        tiff::TiffError::IoError(source) => io_err(path, source),
        other => format_err(path, other.to_string()),
    }
}

pub fn read_geotiff(path: &Path) -> Result<GeoRaster, RasterError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut decoder = Decoder::new(BufReader::new(file)).map_err(|e| tiff_err(path, e))?;
    let (width, height) = decoder.dimensions().map_err(|e| tiff_err(path, e))?;

    let scale = decoder
        .get_tag_f64_vec(Tag::ModelPixelScaleTag)
        .map_err(|_| format_err(path, "missing ModelPixelScale"))?;
    let tiepoint = decoder
        .get_tag_f64_vec(Tag::ModelTiepointTag)
        .map_err(|_| format_err(path, "missing ModelTiepoint"))?;
    if scale.len() < 2 || tiepoint.len() < 6 {
        return Err(format_err(path, "malformed georeferencing tags"));
    }
    if scale[0] != scale[1] {
        return Err(format_err(path, format!("non-square pixels {} x {}", scale[0], scale[1])));
    }
    let (i, j) = (tiepoint[0], tiepoint[1]);
    let origin_x = tiepoint[3] - i * scale[0];
    let origin_y = tiepoint[4] + j * scale[1];

    let crs = match decoder.find_tag_unsigned_vec::<u16>(Tag::GeoKeyDirectoryTag) {
        Ok(Some(keys)) => epsg_from_geokeys(&keys),
        _ => None,
    };
    let nodata = match decoder.get_tag_ascii_string(Tag::GdalNodata) {
        Ok(s) => Some(
            s.trim_matches(char::from(0))
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && (0.0..=65535.0).contains(v))
                .map(|v| v as u16)
                .ok_or_else(|| format_err(path, format!("nodata {s:?} is not a u16")))?,
        ),
        Err(_) => None,
    };

    let data = match decoder.read_image().map_err(|e| tiff_err(path, e))? {
        DecodingResult::U16(data) => data,
        _ => return Err(format_err(path, "expected a single unsigned 16-bit band")),
    };
    if data.len() != width as usize * height as usize {
        return Err(format_err(path, "expected a single unsigned 16-bit band"));
    }
    Ok(GeoRaster {
        width: width as usize,
        height: height as usize,
        origin_x,
        origin_y,
        pixel_size: scale[0],
        crs,
        nodata,
        data,
    })
}

fn epsg_from_geokeys(keys: &[u16]) -> Option<String> {
    let count = usize::from(*keys.get(3)?);
    keys[4..]
        .chunks_exact(4)
        .take(count)
        .find(|k| (k[0] == PROJECTED_CS_TYPE || k[0] == GEOGRAPHIC_TYPE) && k[1] == 0)
        .map(|k| format!("EPSG:{}", k[3]))
}

pub fn write_geotiff(path: &Path, raster: &GeoRaster) -> Result<(), RasterError> {
    if raster.data.len() != raster.width * raster.height || raster.width == 0 || raster.height == 0 {
        return Err(format_err(path, "raster dimensions do not match its data"));
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut encoder = TiffEncoder::new(BufWriter::new(file)).map_err(|e| tiff_err(path, e))?;
    let mut image = encoder
        .new_image::<Gray16>(raster.width as u32, raster.height as u32)
        .map_err(|e| tiff_err(path, e))?;
    {
        let dir = image.encoder();
        dir.write_tag(Tag::ModelPixelScaleTag, &[raster.pixel_size, raster.pixel_size, 0.0][..])
            .map_err(|e| tiff_err(path, e))?;
        dir.write_tag(
            Tag::ModelTiepointTag,
            &[0.0, 0.0, 0.0, raster.origin_x, raster.origin_y, 0.0][..],
        )
        .map_err(|e| tiff_err(path, e))?;
        if let Some(keys) = raster.crs.as_deref().and_then(geokeys_for) {
            dir.write_tag(Tag::GeoKeyDirectoryTag, &keys[..]).map_err(|e| tiff_err(path, e))?;
        }
        if let Some(nodata) = raster.nodata {
            dir.write_tag(Tag::GdalNodata, nodata.to_string().as_str())
                .map_err(|e| tiff_err(path, e))?;
        }
    }
    image.write_data(&raster.data).map_err(|e| tiff_err(path, e))
}

fn geokeys_for(crs: &str) -> Option<Vec<u16>> {
    let code: u16 = crs.strip_prefix("EPSG:")?.parse().ok()?;
    // 4326-4999 are geographic; everything else is written as projected
    let geographic = (4000..5000).contains(&code);
    Some(vec![
        1,
        1,
        0,
        3,
        GT_MODEL_TYPE,
        0,
        1,
        if geographic { MODEL_TYPE_GEOGRAPHIC } else { MODEL_TYPE_PROJECTED },
        GT_RASTER_TYPE,
        0,
        1,
        RASTER_PIXEL_IS_AREA,
        if geographic { GEOGRAPHIC_TYPE } else { PROJECTED_CS_TYPE },
        0,
        1,
        code,
    ])
}
