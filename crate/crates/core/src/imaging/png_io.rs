use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::ImagePlane;
use crate::error::{Error, Result};

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image(format!("{}: {e}", path.display()))
}

/// Reads an 8- or 16-bit RGB or greyscale PNG (alpha, if any, is dropped).
/// 16-bit samples keep their high byte; greyscale is replicated to RGB.
pub fn load_png(path: impl AsRef<Path>) -> Result<ImagePlane> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        other => return Err(png_err(path, format!("unsupported color type {other:?}"))),
    };
    let bytes_per_sample = match info.bit_depth {
        BitDepth::Eight => 1,
        BitDepth::Sixteen => 2,
        other => return Err(png_err(path, format!("unsupported bit depth {other:?}"))),
    };
    let mut data = Vec::with_capacity(3 * w * h);
    for y in 0..h {
        let row = &buf[y * info.line_size..];
        for x in 0..w {
            // big-endian samples: the first byte is the high byte
            let sample = |c: usize| row[(x * channels + c) * bytes_per_sample];
            if channels < 3 {
                let g = sample(0);
                data.extend_from_slice(&[g, g, g]);
            } else {
                data.extend_from_slice(&[sample(0), sample(1), sample(2)]);
            }
        }
    }
    ImagePlane::new(w, h, data)
}

/// Writes an 8-bit RGB PNG.
pub fn save_png(img: &ImagePlane, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), img.width() as u32, img.height() as u32);
    enc.set_color(ColorType::Rgb);
    enc.set_depth(BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| png_err(path, e))?;
    writer.write_image_data(img.data()).map_err(|e| png_err(path, e))?;
    writer.finish().map_err(|e| png_err(path, e))
}
