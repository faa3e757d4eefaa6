//! The operator vocabulary the network is written against, so one wiring
//! serves both plain inference and gradient recording.

use indexmap::IndexMap;

use super::Model;
use crate::autodiff::{bias_tensor, GradientTape, Var};
use crate::error::{Error, Result};
use crate::ops;
use crate::tensor::Tensor;

pub trait Graph {
    type Value;

    fn conv(&mut self, layer: &str, x: &Self::Value) -> Result<Self::Value>;
    fn relu(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn leaky_relu(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn split(&mut self, x: &Self::Value, retained: usize) -> Result<(Self::Value, Self::Value)>;
    fn concat(&mut self, parts: &[&Self::Value]) -> Result<Self::Value>;
    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn attention(&mut self, x: &Self::Value, v: &Self::Value, tile: usize) -> Result<Self::Value>;
    fn depth_to_space(&mut self, x: &Self::Value, r: usize) -> Result<Self::Value>;
}

/// Direct evaluation on a shared, read-only model.
pub struct Eager<'m> {
    pub model: &'m Model,
}

fn name_non_finite(layer: &str, e: Error) -> Error {
    match e {
        Error::NonFinite(_) => Error::NonFinite(format!("layer `{layer}`")),
        other => other,
    }
}

impl Graph for Eager<'_> {
    type Value = Tensor;

    fn conv(&mut self, layer: &str, x: &Tensor) -> Result<Tensor> {
        let p = self.model.layer(layer)?;
        ops::conv2d(x, p).map_err(|e| name_non_finite(layer, e))
    }

    fn relu(&mut self, x: &Tensor) -> Result<Tensor> {
        Ok(ops::relu(x))
    }

    fn leaky_relu(&mut self, x: &Tensor) -> Result<Tensor> {
        ops::leaky_relu(x, ops::LEAKY_SLOPE)
    }

    fn split(&mut self, x: &Tensor, retained: usize) -> Result<(Tensor, Tensor)> {
        x.channel_split(retained)
    }

    fn concat(&mut self, parts: &[&Tensor]) -> Result<Tensor> {
        Tensor::channel_concat(parts)
    }

    fn add(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        a.add(b)
    }

    fn attention(&mut self, x: &Tensor, v: &Tensor, tile: usize) -> Result<Tensor> {
        ops::tile_attention(x, v, tile)
    }

    fn depth_to_space(&mut self, x: &Tensor, r: usize) -> Result<Tensor> {
        ops::depth_to_space(x, r)
    }
}

/// Weight and bias handles of one layer on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LayerVars {
    pub weight: Var,
    pub bias: Var,
    pub groups: usize,
}

/// Records every operation on a tape with the model's parameters as leaves.
pub struct Recording<'t> {
    pub tape: &'t mut GradientTape,
    pub layers: IndexMap<String, LayerVars>,
}

impl<'t> Recording<'t> {
    pub fn new(tape: &'t mut GradientTape, model: &Model) -> Result<Self> {
        let mut layers = IndexMap::new();
        for (name, p) in model.layers() {
            let weight = tape.leaf(p.weight.clone());
            let bias = tape.leaf(bias_tensor(&p.bias)?);
            layers.insert(
                name.clone(),
                LayerVars {
                    weight,
                    bias,
                    groups: p.groups,
                },
            );
        }
        Ok(Recording { tape, layers })
    }
}

impl Graph for Recording<'_> {
    type Value = Var;

    fn conv(&mut self, layer: &str, x: &Var) -> Result<Var> {
        let lv = *self
            .layers
            .get(layer)
            .ok_or_else(|| Error::InvalidConfig(format!("no layer named `{layer}`")))?;
        self.tape
            .conv2d(*x, lv.weight, lv.bias, lv.groups)
            .map_err(|e| name_non_finite(layer, e))
    }

    fn relu(&mut self, x: &Var) -> Result<Var> {
        Ok(self.tape.relu(*x))
    }

    fn leaky_relu(&mut self, x: &Var) -> Result<Var> {
        self.tape.leaky_relu(*x, ops::LEAKY_SLOPE)
    }

    fn split(&mut self, x: &Var, retained: usize) -> Result<(Var, Var)> {
        self.tape.channel_split(*x, retained)
    }

    fn concat(&mut self, parts: &[&Var]) -> Result<Var> {
        let vars: Vec<Var> = parts.iter().map(|v| **v).collect();
        self.tape.channel_concat(&vars)
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        self.tape.add(*a, *b)
    }

    fn attention(&mut self, x: &Var, v: &Var, tile: usize) -> Result<Var> {
        self.tape.tile_attention(*x, *v, tile)
    }

    fn depth_to_space(&mut self, x: &Var, r: usize) -> Result<Var> {
        self.tape.depth_to_space(*x, r)
    }
}
