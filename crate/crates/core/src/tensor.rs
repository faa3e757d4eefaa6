//! Rank-4 `f32` tensors in batch/channel/height/width order.
//!
//! Element `(n, c, h, w)` lives at flat index `((n*C + c)*H + h)*W + w`.
//! Tensors are values: every operation returns a new tensor and leaves its
//! inputs untouched.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Result<Self> {
        let dims = [n, c, h, w];
        if dims.contains(&0) {
            return Err(Error::InvalidShape(dims));
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(Error::InvalidShape(dims))?;
        // Vec<f32> cannot hold more than isize::MAX bytes.
        if count > isize::MAX as usize / std::mem::size_of::<f32>() {
            return Err(Error::InvalidShape(dims));
        }
        Ok(Shape { n, c, h, w })
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    /// Number of elements in one `h x w` plane.
    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }

    pub fn with_channels(&self, c: usize) -> Result<Self> {
        Shape::new(self.n, c, self.h, self.w)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor {
    pub fn full(shape: Shape, value: f32) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.numel()],
        }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn from_vec(shape: Shape, data: Vec<f32>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::DataLength {
                shape,
                len: data.len(),
                expected: shape.numel(),
            });
        }
        Ok(Tensor { shape, data })
    }

    /// Builds a tensor by evaluating `f(n, c, h, w)` at every coordinate.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(shape.numel());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        data.push(f(n, c, h, w));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Mutable access for in-place parameter updates by an exclusive owner.
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> f32 {
        self.data[self.shape.offset(n, c, h, w)]
    }

    /// Contiguous `h x w` plane of channel `c` in batch item `n`.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &self.data[start..start + p]
    }

    pub fn reshape(self, shape: Shape) -> Result<Self> {
        Tensor::from_vec(shape, self.data)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Returns `self` unchanged, or a `NonFinite` error naming `what`.
    pub fn ensure_finite(self, what: impl FnOnce() -> String) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(what()))
        }
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, op: &'static str, f: impl Fn(f32, f32) -> f32) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape,
                right: other.shape,
            });
        }
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn scale(&self, k: f32) -> Tensor {
        self.map(|v| v * k)
    }

    /// Channels `[start, start + len)` of every batch item.
    pub fn channel_slice(&self, start: usize, len: usize) -> Result<Tensor> {
        let s = self.shape;
        if len == 0 || start + len > s.c {
            return Err(Error::invalid(
                "channel_slice",
                format!("range {start}..{} outside {} channels", start + len, s.c),
            ));
        }
        let p = s.plane();
        let mut data = Vec::with_capacity(s.n * len * p);
        for n in 0..s.n {
            let base = (n * s.c + start) * p;
            data.extend_from_slice(&self.data[base..base + len * p]);
        }
        Ok(Tensor {
            shape: s.with_channels(len)?,
            data,
        })
    }

    /// Splits into the first `retained` channels and the remainder.
    pub fn channel_split(&self, retained: usize) -> Result<(Tensor, Tensor)> {
        if retained == 0 || retained >= self.shape.c {
            return Err(Error::invalid(
                "channel_split",
                format!("retained {retained} must lie in (0, {})", self.shape.c),
            ));
        }
        Ok((
            self.channel_slice(0, retained)?,
            self.channel_slice(retained, self.shape.c - retained)?,
        ))
    }

    pub fn channel_concat(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("channel_concat", "empty part list"))?;
        let s0 = first.shape;
        for p in &parts[1..] {
            let s = p.shape;
            if (s.n, s.h, s.w) != (s0.n, s0.h, s0.w) {
                return Err(Error::ShapeMismatch {
                    op: "channel_concat",
                    left: s0,
                    right: s,
                });
            }
        }
        let total_c: usize = parts.iter().map(|p| p.shape.c).sum();
        let shape = s0.with_channels(total_c)?;
        let plane = s0.plane();
        let mut data = Vec::with_capacity(shape.numel());
        for n in 0..s0.n {
            for p in parts {
                let chunk = p.shape.c * plane;
                data.extend_from_slice(&p.data[n * chunk..(n + 1) * chunk]);
            }
        }
        Ok(Tensor { shape, data })
    }
}
