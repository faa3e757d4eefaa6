use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Negative slope used by every leaky rectifier in the network.
pub const LEAKY_SLOPE: f32 = 0.05;

fn check_slope(slope: f32) -> Result<()> {
    if !(slope > 0.0 && slope < 1.0) {
        return Err(Error::invalid("leaky_relu", format!("slope {slope} outside (0, 1)")));
    }
    Ok(())
}

pub fn leaky_relu(x: &Tensor, slope: f32) -> Result<Tensor> {
    check_slope(slope)?;
    x.map(|v| if v >= 0.0 { v } else { slope * v })
        .ensure_finite(|| "leaky_relu".into())
}

/// Exactly-zero inputs take the positive branch.
pub fn leaky_relu_backward(x: &Tensor, grad_out: &Tensor, slope: f32) -> Result<Tensor> {
    check_slope(slope)?;
    x.zip_map(grad_out, "leaky_relu_backward", |v, g| if v >= 0.0 { g } else { slope * g })
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    x.zip_map(grad_out, "relu_backward", |v, g| if v > 0.0 { g } else { 0.0 })
}
