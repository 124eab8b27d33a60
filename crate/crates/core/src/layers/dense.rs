//! Fully-connected layer, expressed with the register-tiled matrix kernels.

use super::matmul::{gemm_nn, gemm_nt, gemm_tn};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gradients produced by [`fully_connected_backward`].
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

fn check(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize)> {
    let is = input.shape();
    let ws = weights.shape();
    if is.len() != 2 || ws.len() != 2 {
        return Err(Error::shape(
            "fully_connected",
            format!("need rank-2 input and weights, got input {is:?}, weights {ws:?}"),
        ));
    }
    let (n, d) = (is[0], is[1]);
    let (m, wd) = (ws[0], ws[1]);
    if wd != d {
        return Err(Error::shape(
            "fully_connected",
            format!("input features {d} do not match weights {ws:?}"),
        ));
    }
    if bias.shape() != [m] {
        return Err(Error::shape(
            "fully_connected",
            format!("bias shape {:?} does not match {m} outputs", bias.shape()),
        ));
    }
    Ok((n, d, m))
}

/// `out[n][m] = bias[m] + Σ_d weights[m][d] · input[n][d]`.
///
/// `input` is `(N, D)`, `weights` is `(M, D)` row-major, `bias` is `(M)`.
pub fn fully_connected_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, d, m) = check(input, weights, bias)?;
    let mut out = Tensor::zeros(&[n, m]);
    let od = out.data_mut();
    let bd = bias.data();
    for in_ in 0..n {
        od[in_ * m..(in_ + 1) * m].copy_from_slice(bd);
    }
    // out[N × M] += X[N × D] · W[M × D]ᵀ
    gemm_nt(input.data(), weights.data(), od, n, d, m);
    Ok(out)
}

/// Backward pass; `grad_out` is `(N, M)`.
pub fn fully_connected_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
) -> Result<DenseGrads> {
    let m = weights.shape()[0];
    let bias = Tensor::zeros(&[m]);
    let (n, d, _) = check(input, weights, &bias)?;
    if grad_out.shape() != [n, m] {
        return Err(Error::shape(
            "fully_connected_backward",
            format!(
                "grad_out shape {:?} does not match forward output [{n}, {m}]",
                grad_out.shape()
            ),
        ));
    }

    let mut grad_input = Tensor::zeros(&[n, d]);
    let mut grad_weights = Tensor::zeros(&[m, d]);
    let mut grad_bias = Tensor::zeros(&[m]);
    let god = grad_out.data();

    // dX[N × D] = G[N × M] · W[M × D]
    gemm_nn(god, weights.data(), grad_input.data_mut(), n, m, d);
    // dW[M × D] = G[N × M]ᵀ · X[N × D]
    gemm_tn(god, input.data(), grad_weights.data_mut(), n, m, d);
    // dB: column sums of G
    let gbd = grad_bias.data_mut();
    for in_ in 0..n {
        for (b, g) in gbd.iter_mut().zip(&god[in_ * m..(in_ + 1) * m]) {
            *b += g;
        }
    }

    Ok(DenseGrads {
        input: grad_input,
        weights: grad_weights,
        bias: grad_bias,
    })
}
