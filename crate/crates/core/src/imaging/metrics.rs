use super::ImagePlane;
use crate::error::{Error, Result};

/// BT.601 limited-range luma in `[16, 235]` for 8-bit RGB input.
pub fn luma(rgb: [u8; 3]) -> f64 {
    let [r, g, b] = rgb.map(|v| v as f64 / 255.0);
    16.0 + 65.481 * r + 128.553 * g + 24.966 * b
}

/// Single-channel floating-point plane, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LumaPlane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

pub fn rgb_to_y(img: &ImagePlane) -> LumaPlane {
    LumaPlane {
        width: img.width(),
        height: img.height(),
        data: img
            .data()
            .chunks_exact(3)
            .map(|p| luma([p[0], p[1], p[2]]))
            .collect(),
    }
}

/// How a benchmark compares a reconstruction with its reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalProtocol {
    pub scale: usize,
    /// Border pixels dropped on every side.
    pub shave: usize,
    /// Compare luma only instead of all three RGB channels.
    pub luminance: bool,
}

impl EvalProtocol {
    /// Luma comparison with a border of `scale` pixels, the convention for
    /// the classic SR benchmark sets.
    pub fn benchmark(scale: usize) -> Self {
        EvalProtocol {
            scale,
            shave: scale,
            luminance: true,
        }
    }

    /// Full RGB comparison, used for validation-style reporting.
    pub fn rgb(scale: usize) -> Self {
        EvalProtocol {
            scale,
            shave: scale,
            luminance: false,
        }
    }
}

/// Peak signal-to-noise ratio in dB over the shaved region, on a 0..255
/// range. Identical inputs report `f64::INFINITY`.
pub fn psnr(a: &ImagePlane, b: &ImagePlane, proto: &EvalProtocol) -> Result<f64> {
    let (w, h) = (a.width(), a.height());
    if (w, h) != (b.width(), b.height()) {
        return Err(Error::Image(format!(
            "psnr of {w}x{h} against {}x{}",
            b.width(),
            b.height()
        )));
    }
    let s = proto.shave;
    if w < 2 * s + 1 || h < 2 * s + 1 {
        return Err(Error::Image(format!("{w}x{h} image too small for shave {s}")));
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for y in s..h - s {
        for x in s..w - s {
            let (pa, pb) = (a.pixel(x, y), b.pixel(x, y));
            if proto.luminance {
                let d = luma(pa) - luma(pb);
                sum += d * d;
                count += 1;
            } else {
                for c in 0..3 {
                    let d = pa[c] as f64 - pb[c] as f64;
                    sum += d * d;
                }
                count += 3;
            }
        }
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}
