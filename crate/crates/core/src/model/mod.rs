//! The super-resolution network: configuration, parameters, forward pass
//! and weight persistence.

mod archive;
mod config;
mod graph;
mod init;
mod network;
mod plan;

use indexmap::IndexMap;

pub use archive::{load_weights, load_weights_inferred, read_archive, save_weights, write_archive, ArchiveEntry, ARCHIVE_MAGIC, ARCHIVE_VERSION};
pub use config::{ModelConfig, NLA_AFTER, NUM_GIDB, TAIL_WIDTH};
pub use graph::{Eager, Graph, LayerVars, Recording};
pub use init::{init_bound, layer_rng};
pub use plan::{layer_plan, LayerRole, LayerSpec};

use crate::error::{Error, Result};
use crate::ops::ConvParams;
use crate::tensor::Tensor;

/// Parameters for every layer of the plan, keyed and ordered by layer name.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    layers: IndexMap<String, ConvParams>,
}

impl Model {
    /// Fresh weights, reproducible from `seed`.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layers = layer_plan(&config)
            .iter()
            .map(|spec| Ok((spec.name.clone(), init::init_layer(spec, seed)?)))
            .collect::<Result<_>>()?;
        Ok(Model { config, layers })
    }

    /// Assembles a model from explicit layers, checking them against the plan.
    pub fn from_layers(config: ModelConfig, mut layers: IndexMap<String, ConvParams>) -> Result<Self> {
        config.validate()?;
        let plan = layer_plan(&config);
        let mut ordered = IndexMap::with_capacity(plan.len());
        for spec in &plan {
            let p = layers
                .swap_remove(&spec.name)
                .ok_or_else(|| Error::InvalidConfig(format!("missing layer `{}`", spec.name)))?;
            if p.weight.shape().dims() != spec.weight_dims() || p.groups != spec.groups {
                return Err(Error::InvalidConfig(format!(
                    "layer `{}` has weight {} groups {}, expected {:?} groups {}",
                    spec.name,
                    p.weight.shape(),
                    p.groups,
                    spec.weight_dims(),
                    spec.groups
                )));
            }
            ordered.insert(spec.name.clone(), p);
        }
        if let Some(extra) = layers.keys().next() {
            return Err(Error::InvalidConfig(format!("unexpected layer `{extra}`")));
        }
        Ok(Model {
            config,
            layers: ordered,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> impl Iterator<Item = (&String, &ConvParams)> {
        self.layers.iter()
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = (&String, &mut ConvParams)> {
        self.layers.iter_mut()
    }

    pub fn layer(&self, name: &str) -> Result<&ConvParams> {
        self.layers
            .get(name)
            .ok_or_else(|| Error::InvalidConfig(format!("no layer named `{name}`")))
    }

    pub fn layer_mut(&mut self, name: &str) -> Result<&mut ConvParams> {
        self.layers
            .get_mut(name)
            .ok_or_else(|| Error::InvalidConfig(format!("no layer named `{name}`")))
    }

    pub fn conv_count(&self) -> usize {
        self.layers.len()
    }

    /// Maps a `(n, 3, h, w)` low-resolution batch to `(n, 3, h*s, w*s)`.
    pub fn forward(&self, lr: &Tensor) -> Result<Tensor> {
        if lr.shape().c != self.config.in_channels {
            return Err(Error::invalid(
                "model_forward",
                format!("expected {} input channels, got {}", self.config.in_channels, lr.shape().c),
            ));
        }
        network::forward(&mut Eager { model: self }, &self.config, lr)
    }

    /// One Gblock, e.g. `prefix = "gidb1.gblock2"`.
    pub fn gblock_forward(&self, prefix: &str, x: &Tensor) -> Result<Tensor> {
        network::gblock(&mut Eager { model: self }, prefix, x)
    }

    /// GIDB number `n` (1-based).
    pub fn gidb_forward(&self, n: usize, x: &Tensor) -> Result<Tensor> {
        if n == 0 || n > NUM_GIDB {
            return Err(Error::invalid("gidb_forward", format!("block index {n} outside 1..={NUM_GIDB}")));
        }
        let expected = if n == 1 { self.config.trunk() } else { self.config.coarse() };
        if x.shape().c != expected {
            return Err(Error::invalid(
                "gidb_forward",
                format!("block {n} expects {expected} channels, got {}", x.shape().c),
            ));
        }
        network::gidb(&mut Eager { model: self }, &self.config, n, x)
    }

    /// Records a forward pass on `rec`'s tape.
    pub fn forward_recorded(&self, rec: &mut Recording<'_>, lr: crate::autodiff::Var) -> Result<crate::autodiff::Var> {
        network::forward(rec, &self.config, &lr)
    }
}
