use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// 8-bit RGB raster, row-major, samples interleaved `r, g, b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!("empty image {width}x{height}")));
        }
        if data.len() != 3 * width * height {
            return Err(Error::Image(format!(
                "{} samples for a {width}x{height} RGB image (expected {})",
                data.len(),
                3 * width * height
            )));
        }
        Ok(ImagePlane { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, rgb.repeat(width * height))
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(3 * width * height);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<ImagePlane> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::Image(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(3 * width * height);
        for y in y0..y0 + height {
            let start = 3 * (y * self.width + x0);
            data.extend_from_slice(&self.data[start..start + 3 * width]);
        }
        ImagePlane::new(width, height, data)
    }

    /// Top-left crop to the largest multiple of `s` in each direction.
    pub fn crop_to_multiple(&self, s: usize) -> Result<ImagePlane> {
        let (w, h) = (self.width / s * s, self.height / s * s);
        if w == 0 || h == 0 {
            return Err(Error::Image(format!(
                "{}x{} image is smaller than scale {s}",
                self.width, self.height
            )));
        }
        self.crop(0, 0, w, h)
    }

    /// `(1, 3, h, w)` tensor with samples scaled to `[0, 1]`.
    pub fn to_tensor(&self) -> Tensor {
        let s = Shape::new(1, 3, self.height, self.width).expect("image extents are positive");
        Tensor::from_fn(s, |_, c, y, x| self.data[3 * (y * self.width + x) + c] as f32 / 255.0)
    }

    /// Stacks equally sized images into one batch.
    pub fn batch_to_tensor(images: &[ImagePlane]) -> Result<Tensor> {
        let first = images
            .first()
            .ok_or_else(|| Error::Image("empty batch".into()))?;
        let (w, h) = (first.width, first.height);
        if images.iter().any(|i| (i.width, i.height) != (w, h)) {
            return Err(Error::Image("batch images differ in size".into()));
        }
        let s = Shape::new(images.len(), 3, h, w)?;
        Ok(Tensor::from_fn(s, |n, c, y, x| images[n].data[3 * (y * w + x) + c] as f32 / 255.0))
    }

    /// Batch item `n` of a 3-channel tensor in `[0, 1]`, rounded half away
    /// from zero and clamped to `[0, 255]`.
    pub fn from_tensor(t: &Tensor, n: usize) -> Result<ImagePlane> {
        let s = t.shape();
        if s.c != 3 || n >= s.n {
            return Err(Error::Image(format!("cannot take RGB image {n} from tensor {s}")));
        }
        let mut data = Vec::with_capacity(3 * s.h * s.w);
        for y in 0..s.h {
            for x in 0..s.w {
                for c in 0..3 {
                    data.push(to_u8(t.at(n, c, y, x) as f64 * 255.0));
                }
            }
        }
        ImagePlane::new(s.w, s.h, data)
    }
}

/// Rounds half away from zero, then clamps to `[0, 255]`.
pub fn to_u8(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.round().clamp(0.0, 255.0) as u8
}
