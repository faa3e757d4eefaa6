//! Self-checks runnable from the command line: operators against naive
//! reference implementations, complexity counters against closed forms, and
//! every backward rule against central finite differences.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{count_activations, count_macs, count_parameters, ComplexityReport};
use crate::autodiff::{GradientTape, Var};
use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, cubic, ImagePlane};
use crate::model::{Model, ModelConfig, Recording, TAIL_WIDTH};
use crate::ops::{self, away_from_zero, grad_check, ConvParams};
use crate::tensor::{Shape, Tensor};
use crate::training::LossKind;

pub const GRAD_TOLERANCE: f64 = 1e-3;
pub const ORACLE_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Ops,
    Counters,
    Grad,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Ops, Suite::Counters, Suite::Grad];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ops => "ops",
            Suite::Counters => "counters",
            Suite::Grad => "grad",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite `{s}` (ops, counters, grad)")))
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}/{}: {}", self.suite.name(), self.name, self.detail)
    }
}

fn check(suite: Suite, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        suite,
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

/// Runs a suite. Errors raised while checking are recorded as failures.
pub fn run_suite(suite: Suite) -> Vec<Check> {
    let result = match suite {
        Suite::Ops => ops_suite(),
        Suite::Counters => counters_suite(),
        Suite::Grad => grad_suite(),
    };
    result.unwrap_or_else(|e| vec![check(suite, "suite", false, e.to_string())])
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape, scale: f32) -> Tensor {
    Tensor::from_fn(shape, |_, _, _, _| rng.random_range(-scale..scale))
}

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .fold(0.0, f64::max)
}

/// Direct six-loop convolution of a dense kernel, zero padding, f64 sums.
pub fn naive_dense_conv(x: &Tensor, weight: &Tensor, bias: &[f32]) -> Result<Tensor> {
    let xs = x.shape();
    let [co, ci, k, _] = weight.shape().dims();
    if ci != xs.c {
        return Err(Error::invalid("naive_dense_conv", "channel mismatch"));
    }
    let pad = (k / 2) as isize;
    let out = Shape::new(xs.n, co, xs.h, xs.w)?;
    Ok(Tensor::from_fn(out, |n, o, y, xx| {
        let mut acc = bias[o] as f64;
        for i in 0..ci {
            for ky in 0..k {
                for kx in 0..k {
                    let sy = y as isize + ky as isize - pad;
                    let sx = xx as isize + kx as isize - pad;
                    if sy < 0 || sx < 0 || sy >= xs.h as isize || sx >= xs.w as isize {
                        continue;
                    }
                    acc += weight.at(o, i, ky, kx) as f64 * x.at(n, i, sy as usize, sx as usize) as f64;
                }
            }
        }
        acc as f32
    }))
}

/// Embeds grouped weights `(co, ci/g, k, k)` into a block-diagonal dense kernel.
pub fn dense_from_grouped(weight: &Tensor, groups: usize) -> Result<Tensor> {
    let [co, cig, k, _] = weight.shape().dims();
    let ci = cig * groups;
    let per_out = co / groups;
    Ok(Tensor::from_fn(Shape::new(co, ci, k, k)?, |o, i, ky, kx| {
        let g = o / per_out;
        if i / cig == g {
            weight.at(o, i - g * cig, ky, kx)
        } else {
            0.0
        }
    }))
}

/// Quadratic-time attention: every position of a tile against every other.
pub fn naive_tile_attention(x: &Tensor, v: &Tensor, tile: usize) -> Result<Tensor> {
    let s = x.shape();
    let cv = v.shape().c;
    let mut out = Tensor::zeros(v.shape());
    let norm = (s.c as f64).sqrt();
    for t in ops::tiles(s, tile) {
        let pos: Vec<(usize, usize)> = (t.y0..t.y1).flat_map(|y| (t.x0..t.x1).map(move |x| (y, x))).collect();
        for &(yi, xi) in &pos {
            let logits: Vec<f64> = pos
                .iter()
                .map(|&(yj, xj)| (0..s.c).map(|c| x.at(t.n, c, yi, xi) as f64 * x.at(t.n, c, yj, xj) as f64).sum::<f64>() / norm)
                .collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            for c in 0..cv {
                let acc: f64 = pos.iter().zip(&e).map(|(&(yj, xj), w)| w / z * v.at(t.n, c, yj, xj) as f64).sum();
                let i = v.shape().offset(t.n, c, yi, xi);
                out.data_mut()[i] = acc as f32;
            }
        }
    }
    Ok(out)
}

/// Parameter total from per-block formulas, without the layer plan.
pub fn closed_form_params(core: usize, nla: bool, scale: usize) -> u64 {
    let (c, d, r) = (4 * core as u64, core as u64, 3 * core as u64);
    let t = TAIL_WIDTH as u64;
    let s2 = (scale * scale) as u64;
    let gblock = |i: u64, o: u64| o * (i / 4) * 9 + o + o * o + o;
    let gidb = |x: u64| gblock(x, c) + 2 * gblock(r, c) + gblock(r, d) + (4 * d + x) * c + c;
    let head = 3 * c * 9 + c;
    let trunk = gidb(c) + 5 * gidb(r);
    let attention = if nla { 2 * 2 * (r * r + r) } else { 0 };
    let tail = 9 * core as u64 * t + t + t * t * 9 + t + t * 3 * s2 + 3 * s2;
    head + trunk + attention + tail
}

fn ops_suite() -> Result<Vec<Check>> {
    let s = Suite::Ops;
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let groups = [1, 2, 4][rng.random_range(0..3)];
        let ci = groups * rng.random_range(1..4);
        let co = groups * rng.random_range(1..4);
        let k = if rng.random_bool(0.5) { 3 } else { 1 };
        let shape = Shape::new(rng.random_range(1..3), ci, rng.random_range(1..8), rng.random_range(1..8))?;
        let x = random_tensor(&mut rng, shape, 1.0);
        let w = random_tensor(&mut rng, Shape::new(co, ci / groups, k, k)?, 1.0);
        let b: Vec<f32> = (0..co).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = ops::conv2d(&x, &ConvParams::new(w.clone(), b.clone(), groups)?)?;
        let slow = naive_dense_conv(&x, &dense_from_grouped(&w, groups)?, &b)?;
        worst = worst.max(max_abs_diff(&fast, &slow));
    }
    out.push(check(s, "grouped_conv_vs_dense", worst <= ORACLE_TOLERANCE, format!("20 cases, max abs diff {worst:.2e}")));

    let mut worst = 0.0f64;
    for &(h, w, tile) in &[(4, 4, 2), (5, 7, 3), (6, 3, 16), (8, 8, 4)] {
        let x = random_tensor(&mut rng, Shape::new(2, 5, h, w)?, 1.0);
        let v = random_tensor(&mut rng, Shape::new(2, 3, h, w)?, 1.0);
        worst = worst.max(max_abs_diff(&ops::tile_attention(&x, &v, tile)?, &naive_tile_attention(&x, &v, tile)?));
    }
    out.push(check(s, "attention_vs_quadratic", worst <= ORACLE_TOLERANCE, format!("4 cases, max abs diff {worst:.2e}")));

    let x = random_tensor(&mut rng, Shape::new(2, 12, 3, 5)?, 1.0);
    let (a, b) = x.channel_split(3)?;
    let back = Tensor::channel_concat(&[&a, &b])?;
    out.push(check(s, "split_concat_round_trip", back == x, "12 channels split 3/9"));

    let y = ops::depth_to_space(&x, 2)?;
    let z = ops::space_to_depth(&y, 2)?;
    out.push(check(
        s,
        "depth_to_space_round_trip",
        z == x && y.shape().dims() == [2, 3, 6, 10],
        format!("{} -> {} -> {}", x.shape(), y.shape(), z.shape()),
    ));

    let t = Tensor::from_vec(Shape::new(1, 1, 1, 3)?, vec![-2.0, 0.0, 3.0])?;
    let l = ops::leaky_relu(&t, ops::LEAKY_SLOPE)?;
    out.push(check(s, "leaky_relu_values", l.data() == [-0.1, 0.0, 3.0], format!("{:?}", l.data())));

    let pou = (0..=100)
        .map(|i| {
            let t = i as f64 / 100.0;
            ((-3..=3).map(|k| cubic(t - k as f64)).sum::<f64>() - 1.0).abs()
        })
        .fold(0.0, f64::max);
    out.push(check(s, "cubic_partition_of_unity", pou < 1e-6, format!("max deviation {pou:.1e}")));

    let img = ImagePlane::filled(19, 11, [7, 99, 201])?;
    let ok = [0.25, 0.5, 2.0, 4.0].iter().all(|&f| {
        bicubic_resize(&img, f, true).is_ok_and(|r| r.data().chunks(3).all(|p| p == [7, 99, 201]))
    });
    out.push(check(s, "bicubic_constant_image", ok, "factors 1/4, 1/2, 2, 4"));
    Ok(out)
}

/// The five configurations of the published complexity table.
pub const TABLE_CONFIGS: [(usize, bool); 5] = [(16, true), (12, false), (8, false), (4, true), (4, false)];

fn counters_suite() -> Result<Vec<Check>> {
    let s = Suite::Counters;
    let mut out = Vec::new();
    for &(core, nla) in &TABLE_CONFIGS {
        let m = Model::build(ModelConfig::new(core, nla)?, 0)?;
        let label = format!("core{core}{}", if nla { "+nla" } else { "" });
        let convs = m.conv_count();
        let want = if nla { 62 } else { 58 };
        out.push(check(s, format!("{label}/convs"), convs == want, format!("{convs} (expected {want})")));
        let params = count_parameters(&m);
        let closed = closed_form_params(core, nla, 4);
        out.push(check(s, format!("{label}/params_closed_form"), params == closed, format!("{params} vs {closed}")));
        let macs = count_macs(&m, 256, 256);
        out.push(check(s, format!("{label}/macs_identity"), macs == params * 65_536, format!("{macs} = {params} x 65536")));
        let unit = count_macs(&m, 1, 1);
        out.push(check(s, format!("{label}/unit_input"), unit == params, format!("{unit} at 1x1")));
        let acts = count_activations(&m, 256, 256);
        let rep = ComplexityReport::for_model(&m, 256, 256);
        let per_pixel: u64 = rep.rows.iter().filter(|r| !r.attention).map(|r| r.out_channels).sum();
        out.push(check(s, format!("{label}/activations"), acts == per_pixel * 65_536, format!("{acts}")));
    }
    Ok(out)
}

/// Finite-difference step for operators linear in each single input element,
/// where a wide step has no truncation error and shrinks f32 rounding noise.
const LINEAR_STEP: f32 = 0.25;
/// Step for smooth operators; with a fourth-order stencil truncation stays
/// well below the f32 rounding noise at this width.
const SMOOTH_STEP: f32 = 0.05;
/// Losses bend on the scale of the Charbonnier epsilon (0.1), so they need a
/// narrower step; their scalar output keeps rounding noise low.
const LOSS_STEP: f32 = 5e-3;
/// Step for anything with rectifier kinks; inputs are kept farther than
/// `2 * KINK_STEP` from zero.
const KINK_STEP: f32 = 0.02;

type Build = Box<dyn Fn(&mut GradientTape, &[Var]) -> Result<Var>>;

fn grad_case(out: &mut Vec<Check>, name: &str, build: Build, inputs: Vec<Tensor>, eps: f32) -> Result<()> {
    let desc: Vec<String> = inputs.iter().map(|t| t.shape().to_string()).collect();
    let r = grad_check(build, &inputs, eps, 7)?;
    out.push(check(
        Suite::Grad,
        name,
        r.passes(GRAD_TOLERANCE),
        format!("{} rel err {:.2e}", desc.join(" "), r.max_rel_err),
    ));
    Ok(())
}

fn grad_suite() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let sh = |n, c, h, w| Shape::new(n, c, h, w);

    for (i, &(n, ci, co, k, g, h, w)) in [(1, 4, 4, 3, 1, 4, 4), (2, 3, 2, 1, 1, 3, 5), (1, 2, 5, 3, 1, 5, 2)].iter().enumerate() {
        let x = random_tensor(&mut rng, sh(n, ci, h, w)?, 1.0);
        let wt = random_tensor(&mut rng, sh(co, ci / g, k, k)?, 0.5);
        let b = random_tensor(&mut rng, sh(1, co, 1, 1)?, 0.5);
        grad_case(&mut out, &format!("conv_dense/{i}"), Box::new(move |t, v| t.conv2d(v[0], v[1], v[2], g)), vec![x, wt, b], LINEAR_STEP)?;
    }
    for (i, &(n, ci, co, h, w)) in [(1, 8, 4, 3, 3), (2, 4, 8, 4, 2), (1, 8, 8, 1, 5)].iter().enumerate() {
        let x = random_tensor(&mut rng, sh(n, ci, h, w)?, 1.0);
        let wt = random_tensor(&mut rng, sh(co, ci / 4, 3, 3)?, 0.5);
        let b = random_tensor(&mut rng, sh(1, co, 1, 1)?, 0.5);
        grad_case(&mut out, &format!("conv_grouped/{i}"), Box::new(|t, v| t.conv2d(v[0], v[1], v[2], 4)), vec![x, wt, b], LINEAR_STEP)?;
    }
    let act_shapes = [sh(1, 2, 3, 3)?, sh(2, 3, 2, 4)?, sh(1, 1, 5, 5)?];
    for (i, &s) in act_shapes.iter().enumerate() {
        let x = away_from_zero(&random_tensor(&mut rng, s, 1.0), 0.1);
        grad_case(&mut out, &format!("leaky_relu/{i}"), Box::new(|t, v| t.leaky_relu(v[0], ops::LEAKY_SLOPE)), vec![x.clone()], KINK_STEP)?;
        grad_case(&mut out, &format!("relu/{i}"), Box::new(|t, v| Ok(t.relu(v[0]))), vec![x], KINK_STEP)?;
    }
    for (i, &(c, h, w, r)) in [(4, 2, 3, 2), (9, 2, 2, 3), (48, 1, 2, 4)].iter().enumerate() {
        let x = random_tensor(&mut rng, sh(1, c, h, w)?, 1.0);
        grad_case(&mut out, &format!("depth_to_space/{i}"), Box::new(move |t, v| t.depth_to_space(v[0], r)), vec![x], LINEAR_STEP)?;
    }
    for (i, &(c, h, w, keep)) in [(4, 2, 2, 1), (6, 3, 1, 4), (3, 1, 4, 2)].iter().enumerate() {
        let x = random_tensor(&mut rng, sh(2, c, h, w)?, 1.0);
        grad_case(
            &mut out,
            &format!("split_concat/{i}"),
            Box::new(move |t, v| {
                let (a, b) = t.channel_split(v[0], keep)?;
                let y = t.add(v[0], v[0])?;
                t.channel_concat(&[b, y, a])
            }),
            vec![x],
            LINEAR_STEP,
        )?;
    }
    for (i, &(n, c, h, w, tile)) in [(1, 3, 4, 4, 2), (2, 4, 3, 5, 16), (1, 6, 5, 3, 3)].iter().enumerate() {
        let x = random_tensor(&mut rng, sh(n, c, h, w)?, 1.0);
        let v = random_tensor(&mut rng, sh(n, c, h, w)?, 1.0);
        grad_case(&mut out, &format!("tile_attention/{i}"), Box::new(move |t, vs| t.tile_attention(vs[0], vs[1], tile)), vec![x, v], SMOOTH_STEP)?;
    }
    for (i, &(c, h, w, tile)) in [(3, 3, 3, 2), (6, 4, 2, 16), (3, 2, 5, 4)].iter().enumerate() {
        let x = random_tensor(&mut rng, sh(1, c, h, w)?, 1.0);
        let p = [
            random_tensor(&mut rng, sh(c, c, 1, 1)?, 0.5),
            random_tensor(&mut rng, sh(1, c, 1, 1)?, 0.5),
            random_tensor(&mut rng, sh(c, c, 1, 1)?, 0.5),
            random_tensor(&mut rng, sh(1, c, 1, 1)?, 0.5),
        ];
        let mut inputs = vec![x];
        inputs.extend(p);
        grad_case(
            &mut out,
            &format!("nla_block/{i}"),
            Box::new(move |t, v| {
                let val = t.conv2d(v[0], v[1], v[2], 1)?;
                let att = t.tile_attention(v[0], val, tile)?;
                let o = t.conv2d(att, v[3], v[4], 1)?;
                t.add(v[0], o)
            }),
            inputs,
            SMOOTH_STEP,
        )?;
    }
    for (i, &s) in [sh(1, 3, 2, 2)?, sh(2, 1, 1, 3)?, sh(1, 2, 1, 4)?].iter().enumerate() {
        let p = random_tensor(&mut rng, s, 1.0);
        let q = random_tensor(&mut rng, s, 1.0);
        for (name, kind) in [("charbonnier", LossKind::Charbonnier { eps: 0.1 }), ("l2", LossKind::L2)] {
            grad_case(&mut out, &format!("{name}/{i}"), Box::new(move |t, v| t.loss(v[0], v[1], kind)), vec![p.clone(), q.clone()], LOSS_STEP)?;
        }
    }
    // Whole-network wiring. Nonnegative weights and positive biases keep
    // every rectifier on its linear side, so the check sees only how the
    // tape routes gradients through splits, concatenations and attention.
    for (i, &(nla, h, w)) in [(true, 3, 3), (false, 2, 3), (true, 1, 4)].iter().enumerate() {
        let cfg = ModelConfig::new(4, nla)?.with_tile(2)?;
        let mut model = Model::build(cfg, i as u64)?;
        for (_, p) in model.layers_mut() {
            p.bias.iter_mut().for_each(|b| *b = 0.5);
            p.weight.data_mut().iter_mut().for_each(|v| *v = v.abs() * 0.5);
        }
        let x = Tensor::from_fn(Shape::new(1, 3, h, w)?, |_, _, _, _| rng.random_range(0.0..1.0));
        grad_case(
            &mut out,
            &format!("model_wiring/{i}"),
            Box::new(move |t, v| {
                let mut rec = Recording::new(t, &model)?;
                model.forward_recorded(&mut rec, v[0])
            }),
            vec![x],
            LINEAR_STEP,
        )?;
    }
    Ok(out)
}
