//! Direct stride-1 "same" convolution with channel groups.
//!
//! Each output plane is owned by one worker and accumulated as
//! `bias + sum over (input channel, ky, kx)` in that fixed order, so results
//! are bit-identical regardless of thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    /// `(out_c, in_c / groups, k, k)`
    pub weight: Tensor,
    pub bias: Vec<f32>,
    pub groups: usize,
}

impl ConvParams {
    pub fn new(weight: Tensor, bias: Vec<f32>, groups: usize) -> Result<Self> {
        validate_weight(weight.shape(), bias.len(), groups)?;
        Ok(ConvParams {
            weight,
            bias,
            groups,
        })
    }

    pub fn zeros(in_c: usize, out_c: usize, k: usize, groups: usize) -> Result<Self> {
        if groups == 0 || !in_c.is_multiple_of(groups) {
            return Err(Error::invalid(
                "conv2d",
                format!("in channels {in_c} not divisible by groups {groups}"),
            ));
        }
        let shape = Shape::new(out_c, in_c / groups, k, k)?;
        Self::new(Tensor::zeros(shape), vec![0.0; out_c], groups)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape().n
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape().c * self.groups
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape().h
    }

    pub fn padding(&self) -> usize {
        (self.kernel() - 1) / 2
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.len()
    }
}

fn validate_weight(ws: Shape, bias_len: usize, groups: usize) -> Result<()> {
    if groups == 0 || !ws.n.is_multiple_of(groups) {
        return Err(Error::invalid(
            "conv2d",
            format!("out channels {} not divisible by groups {groups}", ws.n),
        ));
    }
    if ws.h != ws.w || !(ws.h == 1 || ws.h == 3) {
        return Err(Error::invalid(
            "conv2d",
            format!("kernel must be 1x1 or 3x3, got {}x{}", ws.h, ws.w),
        ));
    }
    if bias_len != ws.n {
        return Err(Error::invalid(
            "conv2d",
            format!("bias length {bias_len} != out channels {}", ws.n),
        ));
    }
    Ok(())
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Clone, Debug)]
pub struct ConvGrads {
    pub x: Tensor,
    pub weight: Tensor,
    pub bias: Vec<f32>,
}

/// `dst[y][x] += k * src[y + dy][x + dx]` wherever the source index is in range.
#[inline]
fn accumulate_shifted(dst: &mut [f32], src: &[f32], h: usize, w: usize, dy: isize, dx: isize, k: f32) {
    let (y0, y1) = valid_range(h, dy);
    let (x0, x1) = valid_range(w, dx);
    if x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let d = &mut dst[y * w + x0..y * w + x1];
        let s0 = (x0 as isize + dx) as usize;
        let s = &src[sy * w + s0..sy * w + s0 + (x1 - x0)];
        for (dv, &sv) in d.iter_mut().zip(s) {
            *dv += k * sv;
        }
    }
}

/// `sum a[y][x] * b[y + dy][x + dx]` over in-range positions, in f64.
#[inline]
fn dot_shifted(a: &[f32], b: &[f32], h: usize, w: usize, dy: isize, dx: isize) -> f64 {
    let (y0, y1) = valid_range(h, dy);
    let (x0, x1) = valid_range(w, dx);
    let mut acc = 0.0f64;
    if x0 >= x1 {
        return acc;
    }
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let s0 = (x0 as isize + dx) as usize;
        let ar = &a[y * w + x0..y * w + x1];
        let br = &b[sy * w + s0..sy * w + s0 + (x1 - x0)];
        for (&av, &bv) in ar.iter().zip(br) {
            acc += av as f64 * bv as f64;
        }
    }
    acc
}

/// Destination indices `i` in `0..len` for which `i + shift` is in `0..len`.
#[inline]
fn valid_range(len: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = (len as isize - shift).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}

fn check_input(x: Shape, ws: Shape, groups: usize) -> Result<()> {
    if x.c != ws.c * groups {
        return Err(Error::invalid(
            "conv2d",
            format!(
                "input has {} channels, weight expects {} x {groups} groups",
                x.c, ws.c
            ),
        ));
    }
    Ok(())
}

pub fn conv2d(x: &Tensor, p: &ConvParams) -> Result<Tensor> {
    conv2d_raw(x, &p.weight, &p.bias, p.groups)
}

/// Convolution on borrowed parameters; `bias` has one entry per output channel.
pub fn conv2d_raw(x: &Tensor, weight: &Tensor, bias: &[f32], groups: usize) -> Result<Tensor> {
    let ws = weight.shape();
    validate_weight(ws, bias.len(), groups)?;
    let xs = x.shape();
    check_input(xs, ws, groups)?;

    let (out_c, in_per_group, k) = (ws.n, ws.c, ws.h);
    let out_per_group = out_c / groups;
    let pad = ((k - 1) / 2) as isize;
    let (h, w) = (xs.h, xs.w);
    let plane = xs.plane();
    let out_shape = xs.with_channels(out_c)?;
    let mut out = vec![0.0f32; out_shape.numel()];
    let wdata = weight.data();

    out.par_chunks_mut(plane).enumerate().for_each(|(idx, dst)| {
        let (n, o) = (idx / out_c, idx % out_c);
        dst.fill(bias[o]);
        let g = o / out_per_group;
        for cl in 0..in_per_group {
            let src = x.plane(n, g * in_per_group + cl);
            for ky in 0..k {
                for kx in 0..k {
                    let wv = wdata[((o * in_per_group + cl) * k + ky) * k + kx];
                    accumulate_shifted(dst, src, h, w, ky as isize - pad, kx as isize - pad, wv);
                }
            }
        }
    });

    Tensor::from_vec(out_shape, out)?.ensure_finite(|| "conv2d".into())
}

pub fn conv2d_backward(x: &Tensor, p: &ConvParams, grad_out: &Tensor) -> Result<ConvGrads> {
    conv2d_backward_raw(x, &p.weight, p.groups, grad_out)
}

pub fn conv2d_backward_raw(x: &Tensor, weight: &Tensor, groups: usize, grad_out: &Tensor) -> Result<ConvGrads> {
    let ws = weight.shape();
    let xs = x.shape();
    check_input(xs, ws, groups)?;
    let gs = grad_out.shape();
    if gs != xs.with_channels(ws.n)? {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            left: xs.with_channels(ws.n)?,
            right: gs,
        });
    }
    let (out_c, in_per_group, k) = (ws.n, ws.c, ws.h);
    let out_per_group = out_c / groups;
    let pad = ((k - 1) / 2) as isize;
    let (h, w) = (xs.h, xs.w);
    let wdata = weight.data();

    let bias: Vec<f32> = (0..out_c)
        .map(|o| {
            (0..xs.n)
                .map(|n| grad_out.plane(n, o).iter().map(|&v| v as f64).sum::<f64>())
                .sum::<f64>() as f32
        })
        .collect();

    let kk = in_per_group * k * k;
    let mut gw = vec![0.0f32; ws.numel()];
    gw.par_chunks_mut(kk).enumerate().for_each(|(o, dst)| {
        let g = o / out_per_group;
        for cl in 0..in_per_group {
            let ci = g * in_per_group + cl;
            for ky in 0..k {
                for kx in 0..k {
                    let acc: f64 = (0..xs.n)
                        .map(|n| {
                            dot_shifted(
                                grad_out.plane(n, o),
                                x.plane(n, ci),
                                h,
                                w,
                                ky as isize - pad,
                                kx as isize - pad,
                            )
                        })
                        .sum();
                    dst[(cl * k + ky) * k + kx] = acc as f32;
                }
            }
        }
    });

    let mut gx = vec![0.0f32; xs.numel()];
    gx.par_chunks_mut(xs.plane()).enumerate().for_each(|(idx, dst)| {
        let (n, ci) = (idx / xs.c, idx % xs.c);
        let (g, cl) = (ci / in_per_group, ci % in_per_group);
        for o in g * out_per_group..(g + 1) * out_per_group {
            let src = grad_out.plane(n, o);
            for ky in 0..k {
                for kx in 0..k {
                    let wv = wdata[((o * in_per_group + cl) * k + ky) * k + kx];
                    accumulate_shifted(dst, src, h, w, pad - ky as isize, pad - kx as isize, wv);
                }
            }
        }
    });

    Ok(ConvGrads {
        x: Tensor::from_vec(xs, gx)?,
        weight: Tensor::from_vec(ws, gw)?,
        bias,
    })
}
