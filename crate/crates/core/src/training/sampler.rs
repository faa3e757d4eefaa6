use rand::Rng;

use super::TrainConfig;
use crate::error::Result;
use crate::imaging::{bicubic_resize, ImagePlane};
use crate::tensor::Tensor;

/// A uniformly placed `hr_patch` square and its bicubic reduction. Extents
/// shorter than the patch are kept whole and padded with zeros.
pub fn sample_patch_images(hr: &ImagePlane, cfg: &TrainConfig, rng: &mut impl Rng) -> Result<(ImagePlane, ImagePlane)> {
    let p = cfg.hr_patch;
    let (w, h) = (hr.width(), hr.height());
    let x0 = if w > p { rng.random_range(0..=w - p) } else { 0 };
    let y0 = if h > p { rng.random_range(0..=h - p) } else { 0 };
    let (cw, ch) = (w.min(p), h.min(p));
    let patch = if cw == p && ch == p {
        hr.crop(x0, y0, p, p)?
    } else {
        let src = hr.crop(x0, y0, cw, ch)?;
        ImagePlane::from_fn(p, p, |x, y| if x < cw && y < ch { src.pixel(x, y) } else { [0; 3] })?
    };
    let lr = bicubic_resize(&patch, 1.0 / cfg.scale as f64, true)?;
    Ok((lr, patch))
}

/// `(lr, hr)` tensors of shape `(1, 3, p/s, p/s)` and `(1, 3, p, p)` in `[0, 1]`.
pub fn sample_patch_pair(hr: &ImagePlane, cfg: &TrainConfig, rng: &mut impl Rng) -> Result<(Tensor, Tensor)> {
    let (lr, hr) = sample_patch_images(hr, cfg, rng)?;
    Ok((lr.to_tensor(), hr.to_tensor()))
}

/// Draws `cfg.batch` pairs, each from an image picked uniformly.
pub fn sample_batch(images: &[ImagePlane], cfg: &TrainConfig, rng: &mut impl Rng) -> Result<(Tensor, Tensor)> {
    let mut lrs = Vec::with_capacity(cfg.batch);
    let mut hrs = Vec::with_capacity(cfg.batch);
    for _ in 0..cfg.batch {
        let img = &images[rng.random_range(0..images.len())];
        let (l, h) = sample_patch_images(img, cfg, rng)?;
        lrs.push(l);
        hrs.push(h);
    }
    Ok((ImagePlane::batch_to_tensor(&lrs)?, ImagePlane::batch_to_tensor(&hrs)?))
}
