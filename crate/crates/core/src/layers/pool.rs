//! 2-D max and average pooling.
//!
//! Padding follows the convention of the convolution toolboxes this pipeline
//! mirrors: padded cells never win a max, and average pooling always divides
//! by the full window area (padded cells contribute zero).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
}

/// Pooling configuration: square `window`, `stride`, symmetric zero `pad`.
#[derive(Debug, Clone, Copy)]
pub struct Pool2d {
    pub kind: PoolKind,
    pub window: usize,
    pub stride: usize,
    pub pad: usize,
}

fn check(input: &Tensor, cfg: Pool2d) -> Result<(usize, usize, usize, usize, usize, usize)> {
    let s = input.shape();
    if s.len() != 4 {
        return Err(Error::shape(
            "pool2d",
            format!("need rank-4 input, got {s:?}"),
        ));
    }
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    if cfg.window == 0 || cfg.stride == 0 {
        return Err(Error::invalid("pool2d", "window and stride must be >= 1"));
    }
    if cfg.pad >= cfg.window {
        return Err(Error::invalid(
            "pool2d",
            format!("pad {} must be smaller than window {}", cfg.pad, cfg.window),
        ));
    }
    if cfg.window > h + 2 * cfg.pad || cfg.window > w + 2 * cfg.pad {
        return Err(Error::invalid(
            "pool2d",
            format!(
                "window {} larger than padded input {}x{} (pad {})",
                cfg.window, h, w, cfg.pad
            ),
        ));
    }
    let oh = (h + 2 * cfg.pad - cfg.window) / cfg.stride + 1;
    let ow = (w + 2 * cfg.pad - cfg.window) / cfg.stride + 1;
    Ok((n, c, h, w, oh, ow))
}

/// Forward pooling over `(N, C, H, W)` input.
pub fn pool2d_forward(input: &Tensor, cfg: Pool2d) -> Result<Tensor> {
    let (n, c, h, w, oh, ow) = check(input, cfg)?;
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let od = out.data_mut();
    let id = input.data();
    let area = (cfg.window * cfg.window) as f64;

    let mut o = 0;
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let v = match cfg.kind {
                    PoolKind::Max => {
                        let mut best = f64::NEG_INFINITY;
                        for_window(cfg, h, w, oy, ox, |iy, ix| {
                            let x = id[base + iy * w + ix];
                            if x > best {
                                best = x;
                            }
                        });
                        best
                    }
                    PoolKind::Avg => {
                        let mut sum = 0.0;
                        for_window(cfg, h, w, oy, ox, |iy, ix| {
                            sum += id[base + iy * w + ix];
                        });
                        sum / area
                    }
                };
                od[o] = v;
                o += 1;
            }
        }
    }
    Ok(out)
}

/// Backward pooling. Max routes each output gradient to the window's argmax,
/// ties broken by first occurrence in row-major scan order; average spreads
/// `g / window²` over the window's in-bounds cells.
pub fn pool2d_backward(input: &Tensor, grad_out: &Tensor, cfg: Pool2d) -> Result<Tensor> {
    let (n, c, h, w, oh, ow) = check(input, cfg)?;
    if grad_out.shape() != [n, c, oh, ow] {
        return Err(Error::shape(
            "pool2d_backward",
            format!(
                "grad_out shape {:?} does not match forward output [{n}, {c}, {oh}, {ow}]",
                grad_out.shape()
            ),
        ));
    }
    let mut grad_input = Tensor::zeros(&[n, c, h, w]);
    let gid = grad_input.data_mut();
    let id = input.data();
    let god = grad_out.data();
    let area = (cfg.window * cfg.window) as f64;

    let mut o = 0;
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let g = god[o];
                o += 1;
                match cfg.kind {
                    PoolKind::Max => {
                        // Recompute the argmax with the same scan order as the
                        // forward pass; strict `>` keeps the first occurrence.
                        let mut best = f64::NEG_INFINITY;
                        let mut arg = None;
                        for_window(cfg, h, w, oy, ox, |iy, ix| {
                            let x = id[base + iy * w + ix];
                            if x > best {
                                best = x;
                                arg = Some(iy * w + ix);
                            }
                        });
                        if let Some(off) = arg {
                            gid[base + off] += g;
                        }
                    }
                    PoolKind::Avg => {
                        let share = g / area;
                        for_window(cfg, h, w, oy, ox, |iy, ix| {
                            gid[base + iy * w + ix] += share;
                        });
                    }
                }
            }
        }
    }
    Ok(grad_input)
}

/// Visit the in-bounds cells of the pooling window at output cell `(oy, ox)`
/// in row-major order.
#[inline]
fn for_window(
    cfg: Pool2d,
    h: usize,
    w: usize,
    oy: usize,
    ox: usize,
    mut visit: impl FnMut(usize, usize),
) {
    for ky in 0..cfg.window {
        let iy = (oy * cfg.stride + ky) as isize - cfg.pad as isize;
        if iy < 0 || iy >= h as isize {
            continue;
        }
        for kx in 0..cfg.window {
            let ix = (ox * cfg.stride + kx) as isize - cfg.pad as isize;
            if ix < 0 || ix >= w as isize {
                continue;
            }
            visit(iy as usize, ix as usize);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{avg_pool2d_reference, max_abs_diff, max_pool2d_reference};
    use crate::rng::rng_from_seed;
    use rand::Rng;

    const MAX22: Pool2d = Pool2d {
        kind: PoolKind::Max,
        window: 2,
        stride: 2,
        pad: 0,
    };

    #[test]
    fn max_pool_2x2_picks_maximum() {
        let input = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        let out = pool2d_forward(&input, MAX22).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1, 1]);
        assert_eq!(out.data(), &[4.0]);
    }

    #[test]
    fn max_pool_backward_routes_to_first_argmax() {
        // All four cells tie; the gradient must land on the first cell of the
        // row-major scan.
        let input = Tensor::from_vec(&[1, 1, 2, 2], vec![5.0, 5.0, 5.0, 5.0]).unwrap();
        let grad_out = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap();
        let g = pool2d_backward(&input, &grad_out, MAX22).unwrap();
        assert_eq!(g.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn avg_pool_divides_by_full_window_area() {
        let input = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        let cfg = Pool2d {
            kind: PoolKind::Avg,
            ..MAX22
        };
        let out = pool2d_forward(&input, cfg).unwrap();
        assert_eq!(out.data(), &[2.5]);

        // With pad 1 and window 2 the top-left window covers one real cell;
        // the divisor stays window² = 4.
        let cfg = Pool2d {
            kind: PoolKind::Avg,
            window: 2,
            stride: 2,
            pad: 1,
        };
        let out = pool2d_forward(&input, cfg).unwrap();
        assert_eq!(out.get(&[0, 0, 0, 0]), 0.25);
    }

    #[test]
    fn rejects_oversized_window_and_bad_pad() {
        let input = Tensor::zeros(&[1, 1, 2, 2]);
        let cfg = Pool2d {
            kind: PoolKind::Max,
            window: 5,
            stride: 1,
            pad: 1,
        };
        assert!(pool2d_forward(&input, cfg).is_err());
        let cfg = Pool2d {
            kind: PoolKind::Max,
            window: 2,
            stride: 1,
            pad: 2,
        };
        assert!(pool2d_forward(&input, cfg).is_err());
    }

    #[test]
    fn matches_reference_on_random_shapes() {
        let mut rng = rng_from_seed(13);
        for case in 0..24 {
            let n = rng.gen_range(1..3);
            let c = rng.gen_range(1..4);
            let window = rng.gen_range(1..4);
            let stride = rng.gen_range(1..4);
            let pad = rng.gen_range(0..window);
            let h = rng.gen_range(window..9);
            let w = rng.gen_range(window..9);
            let len = n * c * h * w;
            let data: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let input = Tensor::from_vec(&[n, c, h, w], data).unwrap();
            for kind in [PoolKind::Max, PoolKind::Avg] {
                let cfg = Pool2d {
                    kind,
                    window,
                    stride,
                    pad,
                };
                let fast = pool2d_forward(&input, cfg).unwrap();
                let slow = match kind {
                    PoolKind::Max => max_pool2d_reference(&input, window, stride, pad),
                    PoolKind::Avg => avg_pool2d_reference(&input, window, stride, pad),
                };
                assert_eq!(fast.shape(), slow.shape(), "case {case} {kind:?}");
                assert!(
                    max_abs_diff(fast.data(), slow.data()) <= 1e-10,
                    "case {case} {kind:?}: forward diverges from reference"
                );
            }
        }
    }
}
