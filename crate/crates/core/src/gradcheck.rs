//! Independent oracles for the numerical core.
//!
//! Definition-literal forward implementations and a central-difference
//! gradient engine. This is test support: everything here favors obviousness
//! over speed and deliberately shares no code with the optimized layer
//! implementations it is used to check.

use crate::tensor::Tensor;

/// Literal cross-correlation with zero padding: seven nested loops over the
/// textbook definition.
pub fn conv2d_reference(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Tensor {
    let (n, ci, h, w) = dims4(input);
    let (co, wci, kh, kw) = dims4(weights);
    assert_eq!(ci, wci);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = Tensor::zeros(&[n, co, oh, ow]);
    for in_ in 0..n {
        for oc in 0..co {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias.get(&[oc]);
                    for ic in 0..ci {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                    acc += weights.get(&[oc, ic, ky, kx])
                                        * input.get(&[in_, ic, iy as usize, ix as usize]);
                                }
                            }
                        }
                    }
                    out.set(&[in_, oc, oy, ox], acc);
                }
            }
        }
    }
    out
}

/// Literal max pooling. Padding cells never win the max.
pub fn max_pool2d_reference(input: &Tensor, window: usize, stride: usize, pad: usize) -> Tensor {
    pool_reference(input, window, stride, pad, true)
}

/// Literal average pooling. The divisor is always `window * window`; padding
/// cells contribute zero.
pub fn avg_pool2d_reference(input: &Tensor, window: usize, stride: usize, pad: usize) -> Tensor {
    pool_reference(input, window, stride, pad, false)
}

fn pool_reference(input: &Tensor, window: usize, stride: usize, pad: usize, max: bool) -> Tensor {
    let (n, c, h, w) = dims4(input);
    let oh = (h + 2 * pad - window) / stride + 1;
    let ow = (w + 2 * pad - window) / stride + 1;
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    for in_ in 0..n {
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut sum = 0.0;
                    for ky in 0..window {
                        for kx in 0..window {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                let v = input.get(&[in_, ch, iy as usize, ix as usize]);
                                if v > best {
                                    best = v;
                                }
                                sum += v;
                            }
                        }
                    }
                    let v = if max {
                        best
                    } else {
                        sum / (window * window) as f64
                    };
                    out.set(&[in_, ch, oy, ox], v);
                }
            }
        }
    }
    out
}

/// Literal fully-connected layer: `out[n][m] = bias[m] + sum_d w[m][d] x[n][d]`.
pub fn fully_connected_reference(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Tensor {
    let (n, d) = dims2(input);
    let (m, wd) = dims2(weights);
    assert_eq!(d, wd);
    let mut out = Tensor::zeros(&[n, m]);
    for in_ in 0..n {
        for om in 0..m {
            let mut acc = bias.get(&[om]);
            for id in 0..d {
                acc += weights.get(&[om, id]) * input.get(&[in_, id]);
            }
            out.set(&[in_, om], acc);
        }
    }
    out
}

/// Literal mean softmax cross-entropy, computed directly from exp/sum. Only
/// safe for modest logit magnitudes — which is the point: it is the oracle
/// for the numerically-stabilized implementation on tame inputs.
pub fn softmax_cross_entropy_reference(logits: &Tensor, labels: &[u8]) -> f64 {
    let (n, k) = dims2(logits);
    assert_eq!(n, labels.len());
    let mut total = 0.0;
    for in_ in 0..n {
        let exps: Vec<f64> = (0..k).map(|j| logits.get(&[in_, j]).exp()).collect();
        let z: f64 = exps.iter().sum();
        total += -(exps[labels[in_] as usize] / z).ln();
    }
    total / n as f64
}

/// Central-difference gradient of a scalar function at `x`.
pub fn central_difference(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut xs = x.to_vec();
    (0..xs.len())
        .map(|i| {
            let orig = xs[i];
            xs[i] = orig + eps;
            let fp = f(&xs);
            xs[i] = orig - eps;
            let fm = f(&xs);
            xs[i] = orig;
            (fp - fm) / (2.0 * eps)
        })
        .collect()
}

/// Symmetric relative error with an absolute floor so that near-zero pairs
/// compare absolutely.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Largest elementwise [`relative_error`] between two gradient vectors.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Largest elementwise absolute difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Result of one gradient-check case: the layer/configuration label, the
/// worst relative error across all checked partials, and how many partial
/// derivatives were compared.
#[derive(Debug, Clone)]
pub struct GradCase {
    pub name: String,
    pub max_rel_err: f64,
    pub n_checks: usize,
}

/// Run the full layer gradient battery: every layer family's analytic
/// backward pass compared against central differences through its forward
/// pass, over randomized shapes that include padded convolutions and
/// stride-2 pools. Both parameter and input gradients are checked.
///
/// The forward passes used for differencing are themselves verified against
/// the literal references above in the unit suites, so the analytic backward
/// code never checks itself.
pub fn gradient_battery(seed: u64, eps: f64) -> Vec<GradCase> {
    use crate::layers::{
        conv2d_backward, conv2d_forward, fully_connected_backward, fully_connected_forward,
        pool2d_backward, pool2d_forward, relu_backward, relu_forward, softmax_cross_entropy,
        Pool2d, PoolKind,
    };
    use rand::Rng;

    let mut rng = crate::rng::rng_from_seed(seed);
    let mut cases = Vec::new();

    let rand_tensor = |shape: &[usize], rng: &mut rand_chacha::ChaCha8Rng| {
        let len: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    };

    // Weighted-sum head: reduces a layer output to a scalar so that a single
    // backward pass yields every partial at once. d(scalar)/d(out) = r.
    fn weighted(out: &Tensor, r: &Tensor) -> f64 {
        out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    }

    // --- convolutions: plain, padded, and strided ---------------------------
    // (n, ci, co, h, w, k, stride, pad)
    type ConvCase = (usize, usize, usize, usize, usize, usize, usize, usize);
    let conv_cfgs: [ConvCase; 7] = [
        (2, 1, 2, 5, 5, 3, 1, 0),
        (1, 2, 3, 6, 5, 3, 1, 1),
        (2, 3, 2, 7, 7, 5, 1, 2),
        (1, 1, 1, 4, 4, 1, 1, 0),
        (2, 2, 2, 6, 6, 3, 2, 1),
        (1, 3, 4, 8, 7, 3, 2, 0),
        (1, 2, 2, 5, 6, 5, 1, 2),
    ];
    for (n, ci, co, h, w, k, stride, pad) in conv_cfgs {
        let input = rand_tensor(&[n, ci, h, w], &mut rng);
        let weights = rand_tensor(&[co, ci, k, k], &mut rng);
        let bias = rand_tensor(&[co], &mut rng);
        let out = conv2d_forward(&input, &weights, &bias, stride, pad).unwrap();
        let r = rand_tensor(out.shape(), &mut rng);
        let grads = conv2d_backward(&input, &weights, &r, stride, pad).unwrap();

        let mut worst = 0.0f64;
        let mut n_checks = 0;
        for (label, analytic, at) in [
            ("dW", grads.weights.data(), Which::Weights),
            ("dB", grads.bias.data(), Which::Bias),
            ("dX", grads.input.data(), Which::Input),
        ] {
            let base = match at {
                Which::Weights => weights.data().to_vec(),
                Which::Bias => bias.data().to_vec(),
                Which::Input => input.data().to_vec(),
            };
            let numeric = central_difference(
                &mut |v: &[f64]| {
                    let (i, w_, b_) = rebuild(&input, &weights, &bias, at, v);
                    weighted(&conv2d_forward(&i, &w_, &b_, stride, pad).unwrap(), &r)
                },
                &base,
                eps,
            );
            worst = worst.max(max_relative_error(analytic, &numeric));
            n_checks += numeric.len();
            let _ = label;
        }
        cases.push(GradCase {
            name: format!("conv2d n{n} ci{ci} co{co} {h}x{w} k{k} s{stride} p{pad}"),
            max_rel_err: worst,
            n_checks,
        });
    }

    // --- pooling: max and avg, strided and padded ----------------------------
    let pool_cfgs: [(usize, usize, usize, usize, usize, usize, usize); 5] = [
        // n, c, h, w, window, stride, pad
        (2, 2, 6, 6, 2, 2, 0),
        (1, 3, 7, 7, 3, 2, 1),
        (2, 1, 5, 6, 3, 1, 0),
        (1, 2, 8, 8, 3, 2, 1),
        (1, 1, 4, 4, 2, 1, 1),
    ];
    for (n, c, h, w, window, stride, pad) in pool_cfgs {
        for kind in [PoolKind::Max, PoolKind::Avg] {
            let cfg = Pool2d {
                kind,
                window,
                stride,
                pad,
            };
            let input = rand_tensor(&[n, c, h, w], &mut rng);
            let out = pool2d_forward(&input, cfg).unwrap();
            let r = rand_tensor(out.shape(), &mut rng);
            let analytic = pool2d_backward(&input, &r, cfg).unwrap();
            let numeric = central_difference(
                &mut |v: &[f64]| {
                    let i = Tensor::from_vec(input.shape(), v.to_vec()).unwrap();
                    weighted(&pool2d_forward(&i, cfg).unwrap(), &r)
                },
                input.data(),
                eps,
            );
            cases.push(GradCase {
                name: format!("pool2d {kind:?} {h}x{w} w{window} s{stride} p{pad}"),
                max_rel_err: max_relative_error(analytic.data(), &numeric),
                n_checks: numeric.len(),
            });
        }
    }

    // --- fully connected ------------------------------------------------------
    for (n, d, m) in [(2, 13, 7), (1, 24, 10), (3, 5, 4), (2, 31, 3)] {
        let input = rand_tensor(&[n, d], &mut rng);
        let weights = rand_tensor(&[m, d], &mut rng);
        let bias = rand_tensor(&[m], &mut rng);
        let r = rand_tensor(&[n, m], &mut rng);
        let grads = fully_connected_backward(&input, &weights, &r).unwrap();

        let mut worst = 0.0f64;
        let mut n_checks = 0;
        for (analytic, at) in [
            (grads.weights.data(), Which::Weights),
            (grads.bias.data(), Which::Bias),
            (grads.input.data(), Which::Input),
        ] {
            let base = match at {
                Which::Weights => weights.data().to_vec(),
                Which::Bias => bias.data().to_vec(),
                Which::Input => input.data().to_vec(),
            };
            let numeric = central_difference(
                &mut |v: &[f64]| {
                    let (i, w_, b_) = rebuild(&input, &weights, &bias, at, v);
                    weighted(&fully_connected_forward(&i, &w_, &b_).unwrap(), &r)
                },
                &base,
                eps,
            );
            worst = worst.max(max_relative_error(analytic, &numeric));
            n_checks += numeric.len();
        }
        cases.push(GradCase {
            name: format!("fully_connected n{n} d{d} m{m}"),
            max_rel_err: worst,
            n_checks,
        });
    }

    // --- relu -----------------------------------------------------------------
    for (n, d) in [(2, 40), (1, 9)] {
        let input = rand_tensor(&[n, d], &mut rng);
        let r = rand_tensor(&[n, d], &mut rng);
        let analytic = relu_backward(&input, &r).unwrap();
        let numeric = central_difference(
            &mut |v: &[f64]| {
                let i = Tensor::from_vec(input.shape(), v.to_vec()).unwrap();
                weighted(&relu_forward(&i), &r)
            },
            input.data(),
            eps,
        );
        cases.push(GradCase {
            name: format!("relu n{n} d{d}"),
            max_rel_err: max_relative_error(analytic.data(), &numeric),
            n_checks: numeric.len(),
        });
    }

    // --- softmax cross-entropy --------------------------------------------------
    for (n, k) in [(3, 10), (5, 4)] {
        let logits = rand_tensor(&[n, k], &mut rng);
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..k) as u8).collect();
        let (_, analytic) = softmax_cross_entropy(&logits, &labels).unwrap();
        let numeric = central_difference(
            &mut |v: &[f64]| {
                let l = Tensor::from_vec(logits.shape(), v.to_vec()).unwrap();
                softmax_cross_entropy(&l, &labels).unwrap().0
            },
            logits.data(),
            eps,
        );
        cases.push(GradCase {
            name: format!("softmax_cross_entropy n{n} k{k}"),
            max_rel_err: max_relative_error(analytic.data(), &numeric),
            n_checks: numeric.len(),
        });
    }

    cases
}

#[derive(Clone, Copy)]
enum Which {
    Weights,
    Bias,
    Input,
}

fn rebuild(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    which: Which,
    v: &[f64],
) -> (Tensor, Tensor, Tensor) {
    let mk = |t: &Tensor| t.clone();
    match which {
        Which::Weights => (
            mk(input),
            Tensor::from_vec(weights.shape(), v.to_vec()).unwrap(),
            mk(bias),
        ),
        Which::Bias => (
            mk(input),
            mk(weights),
            Tensor::from_vec(bias.shape(), v.to_vec()).unwrap(),
        ),
        Which::Input => (
            Tensor::from_vec(input.shape(), v.to_vec()).unwrap(),
            mk(weights),
            mk(bias),
        ),
    }
}

fn dims4(t: &Tensor) -> (usize, usize, usize, usize) {
    let s = t.shape();
    assert_eq!(s.len(), 4, "expected rank-4 tensor, got {s:?}");
    (s[0], s[1], s[2], s[3])
}

fn dims2(t: &Tensor) -> (usize, usize) {
    let s = t.shape();
    assert_eq!(s.len(), 2, "expected rank-2 tensor, got {s:?}");
    (s[0], s[1])
}
