//! ReLU activation.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Elementwise `max(x, 0)`.
pub fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Backward: passes gradient where the forward input was strictly positive.
/// The subgradient at exactly zero is taken as zero.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if input.shape() != grad_out.shape() {
        return Err(Error::shape(
            "relu_backward",
            format!(
                "grad_out shape {:?} does not match input shape {:?}",
                grad_out.shape(),
                input.shape()
            ),
        ));
    }
    let mut grad = grad_out.clone();
    for (g, &x) in grad.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
    Ok(grad)
}
