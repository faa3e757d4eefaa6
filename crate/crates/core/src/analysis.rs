//! Structural complexity counters: parameters, multiply-accumulates,
//! activation elements and convolution layers.
//!
//! Every convolution is stride-1 with "same" padding, so each layer runs at
//! the input resolution and its MAC count is its parameter count times
//! `h * w` (one multiply-accumulate per weight per pixel, plus the bias add).
//! Attention products are reported separately and kept out of `macs`.
//! Activations count convolution outputs of the main path; the 1x1
//! transforms inside attention blocks are left out.

use std::fmt::{self, Write as _};

use crate::model::{layer_plan, LayerRole, Model, ModelConfig};
use crate::ops::tiles;
use crate::tensor::Shape;

/// Reference resolution for comparing against published complexity tables.
pub const REFERENCE_SIZE: (usize, usize) = (256, 256);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerRow {
    pub name: String,
    pub params: u64,
    pub out_channels: u64,
    pub macs: u64,
    pub activations: u64,
    pub attention: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexityReport {
    pub core: usize,
    pub use_nla: bool,
    pub height: usize,
    pub width: usize,
    pub params: u64,
    pub macs: u64,
    pub activations: u64,
    pub convs: u64,
    /// Affinity and aggregation products inside attention tiles.
    pub attention_macs: u64,
    pub rows: Vec<LayerRow>,
}

impl ComplexityReport {
    pub fn for_config(cfg: &ModelConfig, h: usize, w: usize) -> Self {
        let hw = (h * w) as u64;
        let rows: Vec<LayerRow> = layer_plan(cfg)
            .into_iter()
            .map(|spec| {
                let attention = spec.role == LayerRole::Attention;
                let params = spec.param_count() as u64;
                LayerRow {
                    params,
                    out_channels: spec.out_c as u64,
                    macs: params * hw,
                    activations: if attention { 0 } else { spec.out_c as u64 * hw },
                    attention,
                    name: spec.name,
                }
            })
            .collect();
        ComplexityReport {
            core: cfg.core,
            use_nla: cfg.use_nla,
            height: h,
            width: w,
            params: rows.iter().map(|r| r.params).sum(),
            macs: rows.iter().map(|r| r.macs).sum(),
            activations: rows.iter().map(|r| r.activations).sum(),
            convs: rows.len() as u64,
            attention_macs: attention_macs(cfg, h, w),
            rows,
        }
    }

    pub fn for_model(m: &Model, h: usize, w: usize) -> Self {
        Self::for_config(m.config(), h, w)
    }

    /// Flat `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "core={}", self.core);
        let _ = writeln!(s, "nla={}", self.use_nla);
        let _ = writeln!(s, "input={}x{}", self.height, self.width);
        let _ = writeln!(s, "params={}", self.params);
        let _ = writeln!(s, "macs={}", self.macs);
        let _ = writeln!(s, "activations={}", self.activations);
        let _ = writeln!(s, "convs={}", self.convs);
        let _ = writeln!(s, "attention_macs={}", self.attention_macs);
        s
    }
}

impl fmt::Display for ComplexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nw = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<nw$}  {:>9}  {:>6}  {:>14}", "layer", "params", "out_c", "macs")?;
        for r in &self.rows {
            writeln!(f, "{:<nw$}  {:>9}  {:>6}  {:>14}", r.name, r.params, r.out_channels, r.macs)?;
        }
        writeln!(f)?;
        let label = format!("core={}{}", self.core, if self.use_nla { "+NLA" } else { "" });
        writeln!(f, "config          {label}")?;
        writeln!(f, "input           {}x{}", self.height, self.width)?;
        writeln!(f, "params          {} ({:.1}K)", self.params, self.params as f64 / 1e3)?;
        writeln!(f, "macs            {} ({:.2}G)", self.macs, self.macs as f64 / 1e9)?;
        writeln!(f, "activations     {} ({:.1}M)", self.activations, self.activations as f64 / 1e6)?;
        writeln!(f, "convs           {}", self.convs)?;
        write!(f, "attention macs  {} ({:.3}G, not in macs)", self.attention_macs, self.attention_macs as f64 / 1e9)
    }
}

/// Per tile of `N` positions on `c` channels: `N^2 * c` for the affinity
/// plus `N^2 * c` for the aggregation.
pub fn attention_macs(cfg: &ModelConfig, h: usize, w: usize) -> u64 {
    if !cfg.use_nla {
        return 0;
    }
    let Ok(shape) = Shape::new(1, cfg.coarse(), h, w) else {
        return 0;
    };
    let per_block: u64 = tiles(shape, cfg.nla_tile)
        .iter()
        .map(|t| {
            let n = t.len() as u64;
            2 * n * n * cfg.coarse() as u64
        })
        .sum();
    per_block * crate::model::NLA_AFTER.len() as u64
}

pub fn count_parameters(m: &Model) -> u64 {
    m.layers().map(|(_, p)| p.param_count() as u64).sum()
}

pub fn count_macs(m: &Model, h: usize, w: usize) -> u64 {
    ComplexityReport::for_model(m, h, w).macs
}

pub fn count_activations(m: &Model, h: usize, w: usize) -> u64 {
    ComplexityReport::for_model(m, h, w).activations
}

pub fn count_convs(m: &Model) -> u64 {
    m.conv_count() as u64
}
