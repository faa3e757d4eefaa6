//! Neural operators with forward and backward rules.

mod activation;
mod attention;
mod conv;
mod gradcheck;
mod layout;

pub use activation::{leaky_relu, leaky_relu_backward, relu, relu_backward, LEAKY_SLOPE};
pub use attention::{
    attention_weights, nla_block, softmax, tile_attention, tile_attention_backward, tiles, NlaParams, Tile,
};
pub use conv::{conv2d, conv2d_backward, conv2d_backward_raw, conv2d_raw, ConvGrads, ConvParams};
pub use gradcheck::{away_from_zero, grad_check, GradCheckReport};
pub use layout::{depth_to_space, space_to_depth, zero_pad};
