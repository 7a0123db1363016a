use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use crate::depth::DepthImage;
use crate::error::{Error, Result};

/// Raw units per meter.
pub const DEPTH_SCALE: f64 = 256.0;
pub const MAX_ENCODABLE_DEPTH: f64 = u16::MAX as f64 / DEPTH_SCALE;

/// Depth to raw 16-bit units, rounding to the nearest unit. Invalid pixels become 0.
pub fn encode_depth_raw(depth: &DepthImage) -> Result<Vec<u16>> {
    depth
        .values()
        .iter()
        .zip(depth.valid())
        .enumerate()
        .map(|(i, (&z, &ok))| {
            if !ok {
                return Ok(0);
            }
            let raw = (z * DEPTH_SCALE).round();
            if !(1.0..=u16::MAX as f64).contains(&raw) {
                let px = depth.pixel_of(i);
                return Err(Error::DepthOutOfRange {
                    u: px.u as usize,
                    v: px.v as usize,
                    depth: z,
                });
            }
            Ok(raw as u16)
        })
        .collect()
}

pub fn decode_depth_raw(width: usize, height: usize, raw: &[u16]) -> Result<DepthImage> {
    if raw.len() != width * height {
        return Err(Error::LengthMismatch {
            expected: width * height,
            actual: raw.len(),
        });
    }
    let values = raw.iter().map(|&r| r as f64 / DEPTH_SCALE).collect();
    DepthImage::from_values(width, height, values)
}

pub fn read_depth_png(path: impl AsRef<Path>) -> Result<DepthImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::DepthFormat(other.to_string()),
    })?;
    match img {
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            decode_depth_raw(w as usize, h as usize, buf.as_raw())
        }
        other => Err(Error::DepthFormat(format!(
            "expected single-channel 16-bit image, found {:?}",
            other.color()
        ))),
    }
}

pub fn write_depth_png(depth: &DepthImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw = encode_depth_raw(depth)?;
    // The encoder takes native-endian samples and writes them big-endian.
    let bytes: Vec<u8> = raw.iter().flat_map(|r| r.to_ne_bytes()).collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    PngEncoder::new(BufWriter::new(file))
        .write_image(
            &bytes,
            depth.width() as u32,
            depth.height() as u32,
            ExtendedColorType::L16,
        )
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::DepthFormat(other.to_string()),
        })
}
