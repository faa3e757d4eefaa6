use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{bicubic_resize, load_png, psnr, EvalProtocol, ImagePlane};
use crate::error::{Error, Result};
use crate::model::Model;

/// Anything that maps an LR image to an image `scale()` times larger.
pub trait Upscaler: Sync {
    fn scale(&self) -> usize;
    fn upscale(&self, lr: &ImagePlane) -> Result<ImagePlane>;
}

impl Upscaler for Model {
    fn scale(&self) -> usize {
        self.config().scale
    }

    fn upscale(&self, lr: &ImagePlane) -> Result<ImagePlane> {
        let sr = self.forward(&lr.to_tensor())?;
        ImagePlane::from_tensor(&sr, 0)
    }
}

/// Plain bicubic upsampling, the reference baseline.
#[derive(Clone, Copy, Debug)]
pub struct Bicubic {
    pub scale: usize,
}

impl Upscaler for Bicubic {
    fn scale(&self) -> usize {
        self.scale
    }

    fn upscale(&self, lr: &ImagePlane) -> Result<ImagePlane> {
        bicubic_resize(lr, self.scale as f64, false)
    }
}

/// Degrades an HR image the way benchmark inputs are produced: crop to a
/// multiple of `scale`, then antialiased bicubic reduction.
pub fn degrade(hr: &ImagePlane, scale: usize) -> Result<(ImagePlane, ImagePlane)> {
    let hr = hr.crop_to_multiple(scale)?;
    let lr = bicubic_resize(&hr, 1.0 / scale as f64, true)?;
    Ok((hr, lr))
}

pub fn psnr_against_hr(up: &dyn Upscaler, hr: &ImagePlane, proto: &EvalProtocol) -> Result<f64> {
    let (hr, lr) = degrade(hr, proto.scale)?;
    let sr = up.upscale(&lr)?;
    if (sr.width(), sr.height()) != (hr.width(), hr.height()) {
        return Err(Error::Image(format!(
            "upscaler produced {}x{} for a {}x{} reference",
            sr.width(),
            sr.height(),
            hr.width(),
            hr.height()
        )));
    }
    psnr(&sr, &hr, proto)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageScore {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub psnr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub protocol: EvalProtocol,
    pub images: Vec<ImageScore>,
    pub mean_psnr: f64,
}

impl EvalReport {
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scale={}", self.protocol.scale);
        let _ = writeln!(s, "shave={}", self.protocol.shave);
        let _ = writeln!(s, "channel={}", if self.protocol.luminance { "y" } else { "rgb" });
        let _ = writeln!(s, "images={}", self.images.len());
        for img in &self.images {
            let _ = writeln!(s, "psnr.{}={:.4}", img.name, img.psnr);
        }
        let _ = writeln!(s, "mean_psnr={:.4}", self.mean_psnr);
        s
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nw = self.images.iter().map(|i| i.name.len()).max().unwrap_or(4).max(4);
        writeln!(f, "{:<nw$}  {:>11}  {:>9}", "image", "size", "psnr_db")?;
        for i in &self.images {
            let size = format!("{}x{}", i.width, i.height);
            writeln!(f, "{:<nw$}  {:>11}  {:>9.4}", i.name, size, i.psnr)?;
        }
        write!(f, "{:<nw$}  {:>11}  {:>9.4}", "mean", "", self.mean_psnr)
    }
}

/// PNG files of `dir` in filename order.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = p
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && p.is_file() {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyDataset(dir.display().to_string()));
    }
    Ok(files)
}

/// Scores every PNG of `hr_dir`. Images run in parallel; the report lists
/// them by filename and averages in that order.
pub fn eval_dataset(up: &dyn Upscaler, hr_dir: impl AsRef<Path>, proto: &EvalProtocol) -> Result<EvalReport> {
    if up.scale() != proto.scale {
        return Err(Error::InvalidConfig(format!(
            "upscaler scale {} differs from protocol scale {}",
            up.scale(),
            proto.scale
        )));
    }
    let files = list_pngs(hr_dir.as_ref())?;
    let images = files
        .par_iter()
        .map(|p| {
            let hr = load_png(p)?;
            let score = psnr_against_hr(up, &hr, proto)?;
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(ImageScore {
                name,
                width: hr.width() / proto.scale * proto.scale,
                height: hr.height() / proto.scale * proto.scale,
                psnr: score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_psnr = images.iter().map(|i| i.psnr).sum::<f64>() / images.len() as f64;
    Ok(EvalReport {
        protocol: *proto,
        images,
        mean_psnr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::save_png;

    fn textured(w: usize, h: usize, k: usize) -> ImagePlane {
        ImagePlane::from_fn(w, h, |x, y| {
            let v = ((x * 7 + y * 13 + k * 31) % 64) as u8;
            [v * 4, 255 - v * 3, ((x / 3 + y / 5) % 2 * 200) as u8]
        })
        .unwrap()
    }

    #[test]
    fn single_image_mean_is_its_score() {
        let dir = tempfile::tempdir().unwrap();
        save_png(&textured(30, 22, 0), dir.path().join("a.png")).unwrap();
        let r = eval_dataset(&Bicubic { scale: 2 }, dir.path(), &EvalProtocol::benchmark(2)).unwrap();
        assert_eq!(r.images.len(), 1);
        assert_eq!(r.mean_psnr, r.images[0].psnr);
        assert_eq!((r.images[0].width, r.images[0].height), (30, 22));
    }

    #[test]
    fn rows_sorted_by_name() {
        let dir = tempfile::tempdir().unwrap();
        for (i, n) in ["c.png", "a.png", "b.png"].iter().enumerate() {
            save_png(&textured(17, 16, i), dir.path().join(n)).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let r = eval_dataset(&Bicubic { scale: 4 }, dir.path(), &EvalProtocol::benchmark(4)).unwrap();
        let names: Vec<_> = r.images.iter().map(|i| i.name.as_str()).collect();
        assert_eq!(names, ["a.png", "b.png", "c.png"]);
        let mean = r.images.iter().map(|i| i.psnr).sum::<f64>() / 3.0;
        assert_eq!(r.mean_psnr, mean);
        assert!(r.to_key_values().contains("psnr.b.png="));
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let e = eval_dataset(&Bicubic { scale: 4 }, dir.path(), &EvalProtocol::benchmark(4));
        assert!(matches!(e, Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn y_and_rgb_differ_on_colour() {
        let hr = textured(32, 32, 3);
        let up = Bicubic { scale: 4 };
        let y = psnr_against_hr(&up, &hr, &EvalProtocol::benchmark(4)).unwrap();
        let rgb = psnr_against_hr(&up, &hr, &EvalProtocol::rgb(4)).unwrap();
        assert_ne!(y, rgb);
    }
}
