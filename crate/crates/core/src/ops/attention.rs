//! Block-based non-local attention.
//!
//! The plane is cut into non-overlapping `b x b` tiles (border tiles may be
//! smaller). Inside a tile of `N` positions the affinity between positions
//! `i` and `j` is `softmax_j(x_i . x_j / sqrt(c))` on the raw features, and
//! the value stream is aggregated with those weights. A block wraps this
//! with a 1x1 value transform, a 1x1 output transform and a residual add.

use rayon::prelude::*;

use super::conv::{conv2d, ConvParams};
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Max-subtracted softmax.
pub fn softmax(v: &[f32]) -> Vec<f32> {
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    out
}

fn softmax_in_place(v: &mut [f32]) {
    let max = v.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for e in v.iter_mut() {
        *e = (*e - max).exp();
        sum += *e;
    }
    for e in v.iter_mut() {
        *e /= sum;
    }
}

/// A rectangle `[y0, y1) x [x0, x1)` of batch item `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tile {
    pub n: usize,
    pub y0: usize,
    pub y1: usize,
    pub x0: usize,
    pub x1: usize,
}

impl Tile {
    pub fn len(&self) -> usize {
        (self.y1 - self.y0) * (self.x1 - self.x0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major positions as `(y, x)`.
    fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y1).flat_map(move |y| (self.x0..self.x1).map(move |x| (y, x)))
    }
}

pub fn tiles(shape: Shape, tile: usize) -> Vec<Tile> {
    let mut out = Vec::new();
    for n in 0..shape.n {
        for y0 in (0..shape.h).step_by(tile) {
            for x0 in (0..shape.w).step_by(tile) {
                out.push(Tile {
                    n,
                    y0,
                    y1: (y0 + tile).min(shape.h),
                    x0,
                    x1: (x0 + tile).min(shape.w),
                });
            }
        }
    }
    out
}

/// Gathers a tile into an `N x c` row-major matrix.
fn gather(t: &Tensor, tile: &Tile) -> Vec<f32> {
    let c = t.shape().c;
    let mut m = Vec::with_capacity(tile.len() * c);
    for (y, x) in tile.positions() {
        for ch in 0..c {
            m.push(t.at(tile.n, ch, y, x));
        }
    }
    m
}

fn scatter(dst: &mut [f32], shape: Shape, tile: &Tile, m: &[f32]) {
    let c = shape.c;
    for (i, (y, x)) in tile.positions().enumerate() {
        for ch in 0..c {
            dst[shape.offset(tile.n, ch, y, x)] = m[i * c + ch];
        }
    }
}

/// Row-stochastic `N x N` affinity for one tile of `x` (an `N x c` matrix),
/// accumulated in f64.
fn affinity(xm: &[f32], n: usize, c: usize) -> Vec<f64> {
    let scale = 1.0 / (c as f64).sqrt();
    let mut a = vec![0.0f64; n * n];
    for i in 0..n {
        let xi = &xm[i * c..(i + 1) * c];
        let row = &mut a[i * n..(i + 1) * n];
        for (j, r) in row.iter_mut().enumerate() {
            let xj = &xm[j * c..(j + 1) * c];
            let dot: f64 = xi.iter().zip(xj).map(|(&p, &q)| p as f64 * q as f64).sum();
            *r = dot * scale;
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for e in row.iter_mut() {
            *e = (*e - max).exp();
            sum += *e;
        }
        for e in row.iter_mut() {
            *e /= sum;
        }
    }
    a
}

fn check_pair(x: &Tensor, v: &Tensor, tile: usize) -> Result<()> {
    if tile == 0 {
        return Err(Error::invalid("tile_attention", "tile size must be at least 1"));
    }
    let (xs, vs) = (x.shape(), v.shape());
    if (xs.n, xs.h, xs.w) != (vs.n, vs.h, vs.w) {
        return Err(Error::ShapeMismatch {
            op: "tile_attention",
            left: xs,
            right: vs,
        });
    }
    Ok(())
}

/// Per-tile affinity matrices, in [`tiles`] order. Exposed for inspection.
pub fn attention_weights(x: &Tensor, tile: usize) -> Result<Vec<Vec<f32>>> {
    check_pair(x, x, tile)?;
    let c = x.shape().c;
    Ok(tiles(x.shape(), tile)
        .par_iter()
        .map(|t| affinity(&gather(x, t), t.len(), c).into_iter().map(|v| v as f32).collect())
        .collect())
}

/// Aggregates `v` with affinities computed from `x`; output has `v`'s shape.
pub fn tile_attention(x: &Tensor, v: &Tensor, tile: usize) -> Result<Tensor> {
    check_pair(x, v, tile)?;
    let (xc, vs) = (x.shape().c, v.shape());
    let vc = vs.c;
    let results: Vec<(Tile, Vec<f32>)> = tiles(x.shape(), tile)
        .into_par_iter()
        .map(|t| {
            let n = t.len();
            let a = affinity(&gather(x, &t), n, xc);
            let vm = gather(v, &t);
            let mut om = vec![0.0f64; n * vc];
            for i in 0..n {
                let oi = &mut om[i * vc..(i + 1) * vc];
                for j in 0..n {
                    let aij = a[i * n + j];
                    for (o, &vv) in oi.iter_mut().zip(&vm[j * vc..(j + 1) * vc]) {
                        *o += aij * vv as f64;
                    }
                }
            }
            (t, om.into_iter().map(|v| v as f32).collect::<Vec<f32>>())
        })
        .collect();
    let mut out = vec![0.0f32; vs.numel()];
    for (t, om) in &results {
        scatter(&mut out, vs, t, om);
    }
    Tensor::from_vec(vs, out)?.ensure_finite(|| "tile_attention".into())
}

/// Returns `(grad_x, grad_v)` for [`tile_attention`].
pub fn tile_attention_backward(x: &Tensor, v: &Tensor, tile: usize, grad_out: &Tensor) -> Result<(Tensor, Tensor)> {
    check_pair(x, v, tile)?;
    if grad_out.shape() != v.shape() {
        return Err(Error::ShapeMismatch {
            op: "tile_attention_backward",
            left: v.shape(),
            right: grad_out.shape(),
        });
    }
    let (xs, vs) = (x.shape(), v.shape());
    let (xc, vc) = (xs.c, vs.c);
    let scale = 1.0 / (xc as f64).sqrt();
    let results: Vec<(Tile, Vec<f32>, Vec<f32>)> = tiles(xs, tile)
        .into_par_iter()
        .map(|t| {
            let n = t.len();
            let xm = gather(x, &t);
            let a = affinity(&xm, n, xc);
            let vm = gather(v, &t);
            let gm = gather(grad_out, &t);

            let mut gv = vec![0.0f64; n * vc];
            let mut ds = vec![0.0f64; n * n];
            for i in 0..n {
                let gi = &gm[i * vc..(i + 1) * vc];
                let mut row_dot = 0.0f64;
                for j in 0..n {
                    let aij = a[i * n + j];
                    let vj = &vm[j * vc..(j + 1) * vc];
                    let mut da = 0.0f64;
                    for k in 0..vc {
                        da += gi[k] as f64 * vj[k] as f64;
                        gv[j * vc + k] += aij * gi[k] as f64;
                    }
                    ds[i * n + j] = da;
                    row_dot += aij * da;
                }
                for j in 0..n {
                    ds[i * n + j] = a[i * n + j] * (ds[i * n + j] - row_dot);
                }
            }
            let mut gx = vec![0.0f64; n * xc];
            for i in 0..n {
                for j in 0..n {
                    let s = (ds[i * n + j] + ds[j * n + i]) * scale;
                    if s == 0.0 {
                        continue;
                    }
                    for k in 0..xc {
                        gx[i * xc + k] += s * xm[j * xc + k] as f64;
                    }
                }
            }
            (
                t,
                gx.into_iter().map(|g| g as f32).collect(),
                gv.into_iter().map(|g| g as f32).collect(),
            )
        })
        .collect();
    let mut gx = vec![0.0f32; xs.numel()];
    let mut gv = vec![0.0f32; vs.numel()];
    for (t, gxm, gvm) in &results {
        scatter(&mut gx, xs, t, gxm);
        scatter(&mut gv, vs, t, gvm);
    }
    Ok((Tensor::from_vec(xs, gx)?, Tensor::from_vec(vs, gv)?))
}

/// The two 1x1 transforms of one attention block.
#[derive(Clone, Debug, PartialEq)]
pub struct NlaParams {
    pub value: ConvParams,
    pub output: ConvParams,
}

impl NlaParams {
    fn check(&self, c: usize) -> Result<()> {
        for (name, p) in [("value", &self.value), ("output", &self.output)] {
            if p.kernel() != 1 || p.in_channels() != c || p.out_channels() != c {
                return Err(Error::invalid(
                    "nla_block",
                    format!(
                        "{name} transform must be 1x1 {c}->{c}, got {}x{} {}->{}",
                        p.kernel(),
                        p.kernel(),
                        p.in_channels(),
                        p.out_channels()
                    ),
                ));
            }
        }
        Ok(())
    }
}

pub fn nla_block(x: &Tensor, p: &NlaParams, tile: usize) -> Result<Tensor> {
    p.check(x.shape().c)?;
    let v = conv2d(x, &p.value)?;
    let agg = tile_attention(x, &v, tile)?;
    conv2d(&agg, &p.output)?.add(x)
}
