//! The ordered list of convolution layers a [`ModelConfig`] implies.

use super::config::{ModelConfig, NLA_AFTER, NUM_GIDB, TAIL_WIDTH};

/// Which part of the network a layer belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerRole {
    Head,
    Trunk,
    Attention,
    Tail,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub groups: usize,
    pub role: LayerRole,
}

impl LayerSpec {
    fn new(name: impl Into<String>, in_c: usize, out_c: usize, kernel: usize, groups: usize, role: LayerRole) -> Self {
        LayerSpec {
            name: name.into(),
            in_c,
            out_c,
            kernel,
            groups,
            role,
        }
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.out_c, self.in_c / self.groups, self.kernel, self.kernel]
    }

    pub fn weight_count(&self) -> usize {
        self.weight_dims().iter().product()
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_c
    }

    pub fn fan_in(&self) -> usize {
        self.in_c / self.groups * self.kernel * self.kernel
    }
}

pub fn gblock_name(gidb: usize, block: usize) -> String {
    format!("gidb{gidb}.gblock{block}")
}

pub fn nla_name(index: usize) -> String {
    format!("nla{index}")
}

fn gblock(out: &mut Vec<LayerSpec>, prefix: String, in_c: usize, out_c: usize) {
    out.push(LayerSpec::new(format!("{prefix}.group"), in_c, out_c, 3, 4, LayerRole::Trunk));
    out.push(LayerSpec::new(format!("{prefix}.point"), out_c, out_c, 1, 1, LayerRole::Trunk));
}

fn gidb(out: &mut Vec<LayerSpec>, cfg: &ModelConfig, n: usize, in_c: usize) {
    let (c, d, r) = (cfg.trunk(), cfg.distill(), cfg.coarse());
    gblock(out, gblock_name(n, 1), in_c, c);
    gblock(out, gblock_name(n, 2), r, c);
    gblock(out, gblock_name(n, 3), r, c);
    gblock(out, gblock_name(n, 4), r, d);
    out.push(LayerSpec::new(format!("gidb{n}.fuse"), 4 * d + in_c, c, 1, 1, LayerRole::Trunk));
}

/// Layers in execution order.
pub fn layer_plan(cfg: &ModelConfig) -> Vec<LayerSpec> {
    let mut out = Vec::new();
    out.push(LayerSpec::new("head", cfg.in_channels, cfg.trunk(), 3, 1, LayerRole::Head));
    let mut nla_index = 0;
    for n in 1..=NUM_GIDB {
        let in_c = if n == 1 { cfg.trunk() } else { cfg.coarse() };
        gidb(&mut out, cfg, n, in_c);
        if cfg.use_nla && NLA_AFTER.contains(&n) {
            nla_index += 1;
            let r = cfg.coarse();
            let base = nla_name(nla_index);
            out.push(LayerSpec::new(format!("{base}.value"), r, r, 1, 1, LayerRole::Attention));
            out.push(LayerSpec::new(format!("{base}.output"), r, r, 1, 1, LayerRole::Attention));
        }
    }
    out.push(LayerSpec::new("tail.fuse", cfg.gprm_width(), TAIL_WIDTH, 1, 1, LayerRole::Tail));
    out.push(LayerSpec::new("tail.conv", TAIL_WIDTH, TAIL_WIDTH, 3, 1, LayerRole::Tail));
    out.push(LayerSpec::new(
        "upsample",
        TAIL_WIDTH,
        cfg.in_channels * cfg.scale * cfg.scale,
        1,
        1,
        LayerRole::Tail,
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_counts() {
        for core in [4, 8, 12, 16] {
            assert_eq!(layer_plan(&ModelConfig::new(core, false).unwrap()).len(), 58);
            assert_eq!(layer_plan(&ModelConfig::new(core, true).unwrap()).len(), 62);
        }
    }

    #[test]
    fn fuse_concat_widths_for_flagship() {
        let plan = layer_plan(&ModelConfig::new(16, true).unwrap());
        let fuse: Vec<usize> = plan.iter().filter(|l| l.name.ends_with(".fuse") && l.name.starts_with("gidb")).map(|l| l.in_c).collect();
        assert_eq!(fuse, vec![128, 112, 112, 112, 112, 112]);
        assert!(plan.iter().all(|l| l.in_c % l.groups == 0 && l.out_c % l.groups == 0));
    }

    #[test]
    fn names_are_unique() {
        let plan = layer_plan(&ModelConfig::new(8, true).unwrap());
        let mut names: Vec<&str> = plan.iter().map(|l| l.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), plan.len());
    }
}
