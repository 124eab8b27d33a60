//! 2-D convolution (cross-correlation) with zero padding, computed as
//! im2col plus the register-tiled matrix kernels.

use super::matmul::{gemm_nn, gemm_nt, gemm_tn};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gradients produced by [`conv2d_backward`].
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

fn check_shapes(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<(usize, usize, usize, usize, usize, usize, usize)> {
    let is = input.shape();
    let ws = weights.shape();
    if is.len() != 4 || ws.len() != 4 {
        return Err(Error::shape(
            "conv2d",
            format!("need rank-4 input and weights, got input {is:?}, weights {ws:?}"),
        ));
    }
    let (n, ci, h, w) = (is[0], is[1], is[2], is[3]);
    let (co, wci, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    if wci != ci {
        return Err(Error::shape(
            "conv2d",
            format!("input has {ci} channels but weights {ws:?} expect {wci}"),
        ));
    }
    if bias.shape() != [co] {
        return Err(Error::shape(
            "conv2d",
            format!(
                "bias shape {:?} does not match {co} output channels",
                bias.shape()
            ),
        ));
    }
    if stride == 0 {
        return Err(Error::invalid("conv2d", "stride must be >= 1"));
    }
    if kh == 0 || kw == 0 || kh > h + 2 * pad || kw > w + 2 * pad {
        return Err(Error::invalid(
            "conv2d",
            format!("kernel {kh}x{kw} does not fit input {h}x{w} with pad {pad}"),
        ));
    }
    Ok((n, ci, h, w, co, kh, kw))
}

/// Patch-matrix geometry shared by im2col and col2im.
struct Geometry {
    ci: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

/// Unfold one image (`ci·h·w`, channel-planar) into the patch matrix
/// `col[ci·kh·kw × oh·ow]`: row `(ic, ky, kx)`, column `(oy, ox)`.
fn im2col(img: &[f64], g: &Geometry, col: &mut [f64]) {
    let ohw = g.oh * g.ow;
    for ic in 0..g.ci {
        let in_plane = ic * g.h * g.w;
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = ((ic * g.kh + ky) * g.kw + kx) * ohw;
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let dst = &mut col[row + oy * g.ow..row + (oy + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let in_row = in_plane + iy as usize * g.w;
                    if g.stride == 1 {
                        // ix = ox + kx − pad must lie in [0, w)
                        let lo = g.pad.saturating_sub(kx);
                        let hi = (g.w as isize + g.pad as isize - kx as isize)
                            .clamp(0, g.ow as isize) as usize;
                        dst[..lo.min(g.ow)].fill(0.0);
                        if lo < hi {
                            let src = in_row + lo + kx - g.pad;
                            dst[lo..hi].copy_from_slice(&img[src..src + hi - lo]);
                        }
                        dst[hi.max(lo)..].fill(0.0);
                    } else {
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                            *d = if ix >= 0 && ix < g.w as isize {
                                img[in_row + ix as usize]
                            } else {
                                0.0
                            };
                        }
                    }
                }
            }
        }
    }
}

/// Fold a patch-matrix gradient back onto one image, accumulating where
/// patches overlap (the adjoint of [`im2col`]).
fn col2im_add(col: &[f64], g: &Geometry, img: &mut [f64]) {
    let ohw = g.oh * g.ow;
    for ic in 0..g.ci {
        let in_plane = ic * g.h * g.w;
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = ((ic * g.kh + ky) * g.kw + kx) * ohw;
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let in_row = in_plane + iy as usize * g.w;
                    let src_row = &col[row + oy * g.ow..row + (oy + 1) * g.ow];
                    if g.stride == 1 {
                        let lo = g.pad.saturating_sub(kx);
                        let hi = (g.w as isize + g.pad as isize - kx as isize)
                            .clamp(0, g.ow as isize) as usize;
                        if lo < hi {
                            let dst = in_row + lo + kx - g.pad;
                            for (d, s) in img[dst..dst + hi - lo].iter_mut().zip(&src_row[lo..hi]) {
                                *d += s;
                            }
                        }
                    } else {
                        for (ox, s) in src_row.iter().enumerate() {
                            let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                            if ix >= 0 && ix < g.w as isize {
                                img[in_row + ix as usize] += s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Forward cross-correlation.
///
/// `input` is `(N, C_in, H, W)`, `weights` `(C_out, C_in, Kh, Kw)`, `bias`
/// `(C_out)`. Output is `(N, C_out, H', W')` with
/// `H' = (H + 2·pad − Kh) / stride + 1` (floor), likewise for `W'`.
pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (n, ci, h, w, co, kh, kw) = check_shapes(input, weights, bias, stride, pad)?;
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let g = Geometry {
        ci,
        h,
        w,
        kh,
        kw,
        stride,
        pad,
        oh,
        ow,
    };
    let (k_dim, ohw) = (ci * kh * kw, oh * ow);

    let mut out = Tensor::zeros(&[n, co, oh, ow]);
    let od = out.data_mut();
    let id = input.data();
    let wd = weights.data();
    let bd = bias.data();

    let mut col = vec![0.0; k_dim * ohw];
    for in_ in 0..n {
        im2col(&id[in_ * ci * h * w..(in_ + 1) * ci * h * w], &g, &mut col);
        let plane = &mut od[in_ * co * ohw..(in_ + 1) * co * ohw];
        for oc in 0..co {
            plane[oc * ohw..(oc + 1) * ohw].fill(bd[oc]);
        }
        // out[co × ohw] += W[co × k_dim] · col[k_dim × ohw]
        gemm_nn(wd, &col, plane, co, k_dim, ohw);
    }
    Ok(out)
}

/// Backward pass. `grad_out` must have the forward output's shape; gradients
/// for input, weights, and bias are returned fresh (not accumulated).
pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<ConvGrads> {
    let ws = weights.shape();
    let co = ws[0];
    let bias = Tensor::zeros(&[co]);
    let (n, ci, h, w, _, kh, kw) = check_shapes(input, weights, &bias, stride, pad)?;
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    if grad_out.shape() != [n, co, oh, ow] {
        return Err(Error::shape(
            "conv2d_backward",
            format!(
                "grad_out shape {:?} does not match forward output [{n}, {co}, {oh}, {ow}]",
                grad_out.shape()
            ),
        ));
    }

    let g = Geometry {
        ci,
        h,
        w,
        kh,
        kw,
        stride,
        pad,
        oh,
        ow,
    };
    let (k_dim, ohw) = (ci * kh * kw, oh * ow);

    let mut grad_input = Tensor::zeros(&[n, ci, h, w]);
    let mut grad_weights = Tensor::zeros(&[co, ci, kh, kw]);
    let mut grad_bias = Tensor::zeros(&[co]);

    let gid = grad_input.data_mut();
    let gwd = grad_weights.data_mut();
    let gbd = grad_bias.data_mut();
    let id = input.data();
    let wd = weights.data();
    let god = grad_out.data();

    let mut col = vec![0.0; k_dim * ohw];
    let mut dcol = vec![0.0; k_dim * ohw];
    for in_ in 0..n {
        let g_plane = &god[in_ * co * ohw..(in_ + 1) * co * ohw];
        for oc in 0..co {
            let mut bsum = 0.0;
            for v in &g_plane[oc * ohw..(oc + 1) * ohw] {
                bsum += v;
            }
            gbd[oc] += bsum;
        }
        im2col(&id[in_ * ci * h * w..(in_ + 1) * ci * h * w], &g, &mut col);
        // dW[co × k_dim] += G[co × ohw] · col[k_dim × ohw]ᵀ
        gemm_nt(g_plane, &col, gwd, co, ohw, k_dim);
        // dcol[k_dim × ohw] = W[co × k_dim]ᵀ · G[co × ohw]
        dcol.fill(0.0);
        gemm_tn(wd, g_plane, &mut dcol, co, k_dim, ohw);
        col2im_add(
            &dcol,
            &g,
            &mut gid[in_ * ci * h * w..(in_ + 1) * ci * h * w],
        );
    }

    Ok(ConvGrads {
        input: grad_input,
        weights: grad_weights,
        bias: grad_bias,
    })
}
