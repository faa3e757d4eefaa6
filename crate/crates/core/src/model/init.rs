//! Reproducible fan-in scaled uniform initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::plan::LayerSpec;
use crate::error::Result;
use crate::ops::{ConvParams, LEAKY_SLOPE};
use crate::tensor::{Shape, Tensor};

/// Independent stream per `(seed, layer name)`, so adding or reordering
/// layers never shifts the draws of the others.
pub fn layer_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Kaiming-uniform bound for a leaky rectifier with slope 0.05.
pub fn init_bound(fan_in: usize) -> f32 {
    let gain = (2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE)).sqrt();
    gain * (3.0 / fan_in as f32).sqrt()
}

pub fn init_layer(spec: &LayerSpec, seed: u64) -> Result<ConvParams> {
    let [o, i, k, _] = spec.weight_dims();
    let bound = init_bound(spec.fan_in());
    let mut rng = layer_rng(seed, &spec.name);
    let weight = Tensor::from_fn(Shape::new(o, i, k, k)?, |_, _, _, _| rng.random_range(-bound..bound));
    ConvParams::new(weight, vec![0.0; spec.out_c], spec.groups)
}
