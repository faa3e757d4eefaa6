//! Reverse-mode differentiation over whole tensors.
//!
//! A [`GradientTape`] records each operator application in order together
//! with handles to its inputs. [`GradientTape::backward`] walks the records
//! in reverse and adds one vector-Jacobian contribution per input use.

use crate::error::{Error, Result};
use crate::ops;
use crate::tensor::{Shape, Tensor};
use crate::training::LossKind;

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Conv { x: Var, w: Var, b: Var, groups: usize },
    LeakyRelu { x: Var, slope: f32 },
    Relu { x: Var },
    ChannelSlice { x: Var, start: usize },
    Concat { parts: Vec<Var> },
    Add { a: Var, b: Var },
    DepthToSpace { x: Var, r: usize },
    TileAttention { x: Var, v: Var, tile: usize },
    Loss { pred: Var, target: Var, kind: LossKind },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct GradientTape {
    nodes: Vec<Node>,
}

/// Gradients indexed by the [`Var`]s of the tape that produced them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

/// Bias vectors live on the tape as `(1, c, 1, 1)` tensors.
pub fn bias_tensor(bias: &[f32]) -> Result<Tensor> {
    Tensor::from_vec(Shape::new(1, bias.len(), 1, 1)?, bias.to_vec())
}

impl GradientTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, groups: usize) -> Result<Var> {
        let y = ops::conv2d_raw(self.value(x), self.value(w), self.value(b).data(), groups)?;
        Ok(self.push(y, Op::Conv { x, w, b, groups }))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f32) -> Result<Var> {
        let y = ops::leaky_relu(self.value(x), slope)?;
        Ok(self.push(y, Op::LeakyRelu { x, slope }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = ops::relu(self.value(x));
        self.push(y, Op::Relu { x })
    }

    pub fn channel_split(&mut self, x: Var, retained: usize) -> Result<(Var, Var)> {
        let (s, d) = self.value(x).channel_split(retained)?;
        let sv = self.push(s, Op::ChannelSlice { x, start: 0 });
        let dv = self.push(d, Op::ChannelSlice { x, start: retained });
        Ok((sv, dv))
    }

    pub fn channel_concat(&mut self, parts: &[Var]) -> Result<Var> {
        let refs: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let y = Tensor::channel_concat(&refs)?;
        Ok(self.push(y, Op::Concat { parts: parts.to_vec() }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).add(self.value(b))?;
        Ok(self.push(y, Op::Add { a, b }))
    }

    pub fn depth_to_space(&mut self, x: Var, r: usize) -> Result<Var> {
        let y = ops::depth_to_space(self.value(x), r)?;
        Ok(self.push(y, Op::DepthToSpace { x, r }))
    }

    pub fn tile_attention(&mut self, x: Var, v: Var, tile: usize) -> Result<Var> {
        let y = ops::tile_attention(self.value(x), self.value(v), tile)?;
        Ok(self.push(y, Op::TileAttention { x, v, tile }))
    }

    /// Scalar loss recorded as a `(1, 1, 1, 1)` tensor.
    pub fn loss(&mut self, pred: Var, target: Var, kind: LossKind) -> Result<Var> {
        let l = kind.value(self.value(pred), self.value(target))?;
        let y = Tensor::full(Shape::new(1, 1, 1, 1)?, l);
        Ok(self.push(y, Op::Loss { pred, target, kind }))
    }

    /// Propagates `seed` (the cotangent of `output`) back through the tape.
    pub fn backward(&self, output: Var, seed: Tensor) -> Result<Gradients> {
        let out_shape = self.value(output).shape();
        if seed.shape() != out_shape {
            return Err(Error::ShapeMismatch {
                op: "backward",
                left: out_shape,
                right: seed.shape(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(seed);
        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(&node.op, &g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    /// `backward` with a unit seed, for scalar outputs such as losses.
    pub fn backward_scalar(&self, output: Var) -> Result<Gradients> {
        let seed = Tensor::full(self.value(output).shape(), 1.0);
        self.backward(output, seed)
    }

    fn propagate(&self, op: &Op, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        match *op {
            Op::Leaf => {}
            Op::Conv { x, w, b, groups } => {
                let cg = ops::conv2d_backward_raw(self.value(x), self.value(w), groups, g)?;
                accumulate(grads, x, cg.x)?;
                accumulate(grads, w, cg.weight)?;
                accumulate(grads, b, bias_tensor(&cg.bias)?)?;
            }
            Op::LeakyRelu { x, slope } => {
                let gx = ops::leaky_relu_backward(self.value(x), g, slope)?;
                accumulate(grads, x, gx)?;
            }
            Op::Relu { x } => {
                let gx = ops::relu_backward(self.value(x), g)?;
                accumulate(grads, x, gx)?;
            }
            Op::ChannelSlice { x, start } => {
                let xs = self.value(x).shape();
                let gs = g.shape();
                let mut full = vec![0.0f32; xs.numel()];
                let p = xs.plane();
                for n in 0..xs.n {
                    let dst = (n * xs.c + start) * p;
                    let src = n * gs.c * p;
                    full[dst..dst + gs.c * p].copy_from_slice(&g.data()[src..src + gs.c * p]);
                }
                accumulate(grads, x, Tensor::from_vec(xs, full)?)?;
            }
            Op::Concat { ref parts } => {
                let mut start = 0;
                for &p in parts {
                    let c = self.value(p).shape().c;
                    accumulate(grads, p, g.channel_slice(start, c)?)?;
                    start += c;
                }
            }
            Op::Add { a, b } => {
                accumulate(grads, a, g.clone())?;
                accumulate(grads, b, g.clone())?;
            }
            Op::DepthToSpace { x, r } => {
                accumulate(grads, x, ops::space_to_depth(g, r)?)?;
            }
            Op::TileAttention { x, v, tile } => {
                let (gx, gv) = ops::tile_attention_backward(self.value(x), self.value(v), tile, g)?;
                accumulate(grads, x, gx)?;
                accumulate(grads, v, gv)?;
            }
            Op::Loss { pred, target, kind } => {
                let up = g.data()[0];
                let gp = kind.backward(self.value(pred), self.value(target))?.scale(up);
                let gt = gp.scale(-1.0);
                accumulate(grads, pred, gp)?;
                accumulate(grads, target, gt)?;
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) -> Result<()> {
    match &mut grads[v.0] {
        Some(existing) => *existing = existing.add(&g)?,
        slot @ None => *slot = Some(g),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fan_out_accumulates_each_use() {
        let mut tape = GradientTape::new();
        let s = Shape::new(1, 2, 1, 1).unwrap();
        let x = tape.leaf(Tensor::from_vec(s, vec![1.0, -2.0]).unwrap());
        let y = tape.add(x, x).unwrap();
        let z = tape.add(y, x).unwrap();
        let g = tape.backward(z, Tensor::full(s, 1.0)).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn split_then_concat_passes_gradient_through() {
        let mut tape = GradientTape::new();
        let s = Shape::new(2, 4, 1, 2).unwrap();
        let x = tape.leaf(Tensor::zeros(s));
        let (a, b) = tape.channel_split(x, 1).unwrap();
        let y = tape.channel_concat(&[b, a]).unwrap();
        let seed = Tensor::from_fn(s, |n, c, _, w| (n * 100 + c * 10 + w) as f32);
        let g = tape.backward(y, seed).unwrap();
        let gx = g.get(x).unwrap();
        // channel 0 of x became channel 3 of y; x's channels 1..4 became 0..3
        assert_eq!(gx.at(1, 0, 0, 1), 131.0);
        assert_eq!(gx.at(0, 2, 0, 0), 10.0);
    }

    #[test]
    fn seed_shape_is_checked() {
        let mut tape = GradientTape::new();
        let x = tape.leaf(Tensor::zeros(Shape::new(1, 1, 2, 2).unwrap()));
        assert!(tape.backward(x, Tensor::zeros(Shape::new(1, 1, 1, 1).unwrap())).is_err());
    }

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let mut tape = GradientTape::new();
        let t = Tensor::full(Shape::new(1, 3, 2, 2).unwrap(), 0.5);
        let p = tape.leaf(t.clone());
        let q = tape.leaf(t);
        let l = tape.loss(p, q, LossKind::L2).unwrap();
        let g = tape.backward_scalar(l).unwrap();
        assert!(g.get(p).unwrap().data().iter().all(|&v| v == 0.0));
    }
}
