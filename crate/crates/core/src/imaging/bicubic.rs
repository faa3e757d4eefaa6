//! Separable bicubic resampling with the `a = -0.5` cubic convolution kernel.
//!
//! Output sample `i` is centred at source coordinate `(i + 0.5) / f - 0.5`.
//! When shrinking with antialiasing the kernel is stretched by `1 / f` (and
//! scaled by `f`), matching the resizer benchmark LR images are made with.
//! Taps that fall outside the image replicate the nearest edge sample.

use super::plane::{to_u8, ImagePlane};
use crate::error::{Error, Result};

pub fn cubic(x: f64) -> f64 {
    let ax = x.abs();
    let ax2 = ax * ax;
    let ax3 = ax2 * ax;
    if ax <= 1.0 {
        1.5 * ax3 - 2.5 * ax2 + 1.0
    } else if ax < 2.0 {
        -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    } else {
        0.0
    }
}

/// Normalized taps `(source index, weight)` for every output index of one axis.
#[derive(Clone, Debug)]
pub struct AxisWeights {
    pub taps: Vec<Vec<(usize, f64)>>,
}

pub fn axis_weights(in_len: usize, out_len: usize, factor: f64, antialias: bool) -> AxisWeights {
    let shrink = antialias && factor < 1.0;
    let support = if shrink { 2.0 / factor } else { 2.0 };
    let taps = (0..out_len)
        .map(|i| {
            let u = (i as f64 + 0.5) / factor - 0.5;
            let first = (u - support).floor() as isize;
            let last = (u + support).ceil() as isize;
            let mut row: Vec<(usize, f64)> = Vec::new();
            for j in first..=last {
                let d = u - j as f64;
                let w = if shrink { factor * cubic(factor * d) } else { cubic(d) };
                if w == 0.0 {
                    continue;
                }
                let src = j.clamp(0, in_len as isize - 1) as usize;
                match row.last_mut() {
                    Some((s, acc)) if *s == src => *acc += w,
                    _ => row.push((src, w)),
                }
            }
            let sum: f64 = row.iter().map(|t| t.1).sum();
            for t in &mut row {
                t.1 /= sum;
            }
            row
        })
        .collect();
    AxisWeights { taps }
}

/// Output extent `ceil(len * factor)`, with a small tolerance so that exact
/// ratios like `0.25 * 256` are not pushed up by float error.
pub fn output_len(len: usize, factor: f64) -> usize {
    let v = len as f64 * factor;
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r as usize
    } else {
        v.ceil() as usize
    }
}

pub fn bicubic_resize(img: &ImagePlane, factor: f64, antialias: bool) -> Result<ImagePlane> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::Image(format!("resize factor {factor} must be positive")));
    }
    let (w, h) = (img.width(), img.height());
    let (ow, oh) = (output_len(w, factor), output_len(h, factor));
    if ow == 0 || oh == 0 {
        return Err(Error::Image(format!("resize of {w}x{h} by {factor} is empty")));
    }
    let xw = axis_weights(w, ow, factor, antialias);
    let yw = axis_weights(h, oh, factor, antialias);
    let src = img.data();

    // horizontal pass, kept in floating point
    let mut mid = vec![0.0f64; 3 * ow * h];
    for y in 0..h {
        for (x, taps) in xw.taps.iter().enumerate() {
            for c in 0..3 {
                let mut acc = 0.0;
                for &(sx, wt) in taps {
                    acc += wt * src[3 * (y * w + sx) + c] as f64;
                }
                mid[3 * (y * ow + x) + c] = acc;
            }
        }
    }
    let mut out = Vec::with_capacity(3 * ow * oh);
    for taps in &yw.taps {
        for x in 0..ow {
            for c in 0..3 {
                let mut acc = 0.0;
                for &(sy, wt) in taps {
                    acc += wt * mid[3 * (sy * ow + x) + c];
                }
                out.push(to_u8(acc));
            }
        }
    }
    ImagePlane::new(ow, oh, out)
}
