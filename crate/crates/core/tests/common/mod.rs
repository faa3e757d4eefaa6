#![allow(dead_code)]

use gidnet_core::imaging::ImagePlane;
use gidnet_core::tensor::{Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: [usize; 4], scale: f32) -> Tensor {
    let s = Shape::new(dims[0], dims[1], dims[2], dims[3]).unwrap();
    Tensor::from_fn(s, |_, _, _, _| rng.random_range(-scale..scale))
}

pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .fold(0.0, f64::max)
}

/// Four 32x32 hard-edged test cards: checkerboard, disc, diagonal stripes,
/// and a bar over a split background.
pub fn test_cards() -> Vec<ImagePlane> {
    let pal = [[230u8, 40, 40], [30, 200, 60], [40, 60, 220], [240, 220, 30], [20, 20, 20], [250, 250, 250]];
    (0..4)
        .map(|k| {
            ImagePlane::from_fn(32, 32, |x, y| {
                let (xf, yf) = (x as f64 - 15.5, y as f64 - 15.5);
                let sel = match k {
                    0 => ((x / 8) + (y / 8)) % 2,
                    1 => usize::from(xf * xf + yf * yf < 120.0),
                    2 => ((x + y) / 6) % 2,
                    _ => usize::from(x > 10 && x < 22) + 2 * usize::from(y > 19),
                };
                pal[(sel + k) % pal.len()]
            })
            .unwrap()
        })
        .collect()
}

pub fn noise_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImagePlane {
    let data = (0..3 * w * h).map(|_| rng.random::<u8>()).collect();
    ImagePlane::new(w, h, data).unwrap()
}

/// Cross-correlation of a dense kernel with zero padding `k / 2`.
pub fn dense_conv(x: &Tensor, w: &Tensor, b: &[f32]) -> Tensor {
    let [n, ci, h, wd] = x.shape().dims();
    let [co, wci, k, _] = w.shape().dims();
    assert_eq!(ci, wci);
    let p = (k / 2) as isize;
    let mut out = vec![0.0f32; n * co * h * wd];
    for b_ in 0..n {
        for o in 0..co {
            for y in 0..h {
                for xx in 0..wd {
                    let mut acc = b[o] as f64;
                    for i in 0..ci {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = y as isize + ky as isize - p;
                                let sx = xx as isize + kx as isize - p;
                                if (0..h as isize).contains(&sy) && (0..wd as isize).contains(&sx) {
                                    acc += w.at(o, i, ky, kx) as f64 * x.at(b_, i, sy as usize, sx as usize) as f64;
                                }
                            }
                        }
                    }
                    out[((b_ * co + o) * h + y) * wd + xx] = acc as f32;
                }
            }
        }
    }
    Tensor::from_vec(Shape::new(n, co, h, wd).unwrap(), out).unwrap()
}

/// Grouped convolution as `groups` independent dense convolutions whose
/// outputs are stacked along channels.
pub fn per_group_conv(x: &Tensor, w: &Tensor, b: &[f32], groups: usize) -> Tensor {
    let cig = w.shape().c;
    let cog = w.shape().n / groups;
    let parts: Vec<Tensor> = (0..groups)
        .map(|g| {
            let xg = x.channel_slice(g * cig, cig).unwrap();
            let wg = Tensor::from_fn(Shape::new(cog, cig, w.shape().h, w.shape().w).unwrap(), |o, i, ky, kx| {
                w.at(g * cog + o, i, ky, kx)
            });
            dense_conv(&xg, &wg, &b[g * cog..(g + 1) * cog])
        })
        .collect();
    let refs: Vec<&Tensor> = parts.iter().collect();
    Tensor::channel_concat(&refs).unwrap()
}
