//! Grouped information-distilling super-resolution network on a small CPU
//! tensor engine: operators with hand-written gradients, the network and its
//! weight archive, complexity counters, a trainer, and image evaluation.

// `!(x > 0.0)` style guards are there to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod autodiff;
pub mod error;
pub mod imaging;
pub mod model;
pub mod ops;
pub mod tensor;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Model, ModelConfig};
pub use tensor::{Shape, Tensor};
