//! Network wiring: Gblock, GIDB, the global refinement chain and the tail.

use super::config::{ModelConfig, NLA_AFTER, NUM_GIDB};
use super::graph::Graph;
use super::plan::{gblock_name, nla_name};
use crate::error::Result;

/// Grouped 3x3 (groups = 4), ReLU, 1x1, leaky ReLU.
pub fn gblock<G: Graph>(g: &mut G, prefix: &str, x: &G::Value) -> Result<G::Value> {
    let y = g.conv(&format!("{prefix}.group"), x)?;
    let y = g.relu(&y)?;
    let y = g.conv(&format!("{prefix}.point"), &y)?;
    g.leaky_relu(&y)
}

/// Three split-and-refine steps, a distill-only fourth Gblock, then a 1x1
/// fusion over the retained parts and the block input.
pub fn gidb<G: Graph>(g: &mut G, cfg: &ModelConfig, n: usize, x: &G::Value) -> Result<G::Value> {
    let d = cfg.distill();
    let y1 = gblock(g, &gblock_name(n, 1), x)?;
    let (s1, c1) = g.split(&y1, d)?;
    let y2 = gblock(g, &gblock_name(n, 2), &c1)?;
    let (s2, c2) = g.split(&y2, d)?;
    let y3 = gblock(g, &gblock_name(n, 3), &c2)?;
    let (s3, c3) = g.split(&y3, d)?;
    let s4 = gblock(g, &gblock_name(n, 4), &c3)?;
    let cat = g.concat(&[&s1, &s2, &s3, &s4, x])?;
    let fused = g.conv(&format!("gidb{n}.fuse"), &cat)?;
    g.leaky_relu(&fused)
}

/// `output(attend(x, value(x))) + x`
pub fn nla<G: Graph>(g: &mut G, cfg: &ModelConfig, index: usize, x: &G::Value) -> Result<G::Value> {
    let base = nla_name(index);
    let v = g.conv(&format!("{base}.value"), x)?;
    let agg = g.attention(x, &v, cfg.nla_tile)?;
    let o = g.conv(&format!("{base}.output"), &agg)?;
    g.add(&o, x)
}

pub fn forward<G: Graph>(g: &mut G, cfg: &ModelConfig, lr: &G::Value) -> Result<G::Value> {
    let f0 = g.conv("head", lr)?;
    let mut retained = Vec::with_capacity(NUM_GIDB);
    let mut coarse: Option<G::Value> = None;
    let mut nla_index = 0;
    for n in 1..NUM_GIDB {
        let out = gidb(g, cfg, n, coarse.as_ref().unwrap_or(&f0))?;
        let (s, mut d) = g.split(&out, cfg.distill())?;
        if cfg.use_nla && NLA_AFTER.contains(&n) {
            nla_index += 1;
            d = nla(g, cfg, nla_index, &d)?;
        }
        retained.push(s);
        coarse = Some(d);
    }
    let last = gidb(g, cfg, NUM_GIDB, coarse.as_ref().unwrap_or(&f0))?;
    retained.push(last);

    let refs: Vec<&G::Value> = retained.iter().collect();
    let f7 = g.concat(&refs)?;
    let f8 = g.conv("tail.fuse", &f7)?;
    let f8 = g.leaky_relu(&f8)?;
    let f9 = g.conv("tail.conv", &f8)?;
    let mut f9 = g.leaky_relu(&f9)?;
    if cfg.has_long_residual() {
        f9 = g.add(&f9, &f0)?;
    }
    let up = g.conv("upsample", &f9)?;
    g.depth_to_space(&up, cfg.scale)
}
