//! Parameter-free rearrangements: depth-to-space and zero padding.

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// `out[n][c][h*r + i][w*r + j] = in[n][c*r*r + i*r + j][h][w]`
pub fn depth_to_space(x: &Tensor, r: usize) -> Result<Tensor> {
    let s = x.shape();
    if r == 0 || !s.c.is_multiple_of(r * r) {
        return Err(Error::invalid(
            "depth_to_space",
            format!("{} channels not divisible by {r}^2", s.c),
        ));
    }
    let oc = s.c / (r * r);
    let os = Shape::new(s.n, oc, s.h * r, s.w * r)?;
    let src = x.data();
    let mut out = vec![0.0f32; os.numel()];
    for n in 0..s.n {
        for c in 0..oc {
            for i in 0..r {
                for j in 0..r {
                    let ic = c * r * r + i * r + j;
                    for h in 0..s.h {
                        let row = &src[s.offset(n, ic, h, 0)..s.offset(n, ic, h, 0) + s.w];
                        let base = os.offset(n, c, h * r + i, 0);
                        for (w, &v) in row.iter().enumerate() {
                            out[base + w * r + j] = v;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(os, out)
}

/// Exact inverse of [`depth_to_space`]; also its backward rule.
pub fn space_to_depth(x: &Tensor, r: usize) -> Result<Tensor> {
    let s = x.shape();
    if r == 0 || !s.h.is_multiple_of(r) || !s.w.is_multiple_of(r) {
        return Err(Error::invalid(
            "space_to_depth",
            format!("{}x{} not divisible by {r}", s.h, s.w),
        ));
    }
    let os = Shape::new(s.n, s.c * r * r, s.h / r, s.w / r)?;
    Ok(Tensor::from_fn(os, |n, c, h, w| {
        let (oc, rem) = (c / (r * r), c % (r * r));
        x.at(n, oc, h * r + rem / r, w * r + rem % r)
    }))
}

pub fn zero_pad(x: &Tensor, top: usize, bottom: usize, left: usize, right: usize) -> Result<Tensor> {
    let s = x.shape();
    let os = Shape::new(s.n, s.c, s.h + top + bottom, s.w + left + right)?;
    let mut out = vec![0.0f32; os.numel()];
    for n in 0..s.n {
        for c in 0..s.c {
            for h in 0..s.h {
                let dst = os.offset(n, c, h + top, left);
                let src = s.offset(n, c, h, 0);
                out[dst..dst + s.w].copy_from_slice(&x.data()[src..src + s.w]);
            }
        }
    }
    Tensor::from_vec(os, out)
}
