//! Model graphs: a small sequential CNN container and the two reference
//! architectures built on it.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::layers::{
    conv2d_backward, conv2d_forward, fully_connected_backward, fully_connected_forward,
    pool2d_backward, pool2d_forward, relu_backward, relu_forward, softmax_cross_entropy, Pool2d,
    PoolKind,
};
use crate::optim::ParamSlot;
use crate::rng::rng_from_seed;
use crate::tensor::Tensor;

/// One step of a sequential model. `Conv` and `FullyConnected` consume the
/// next parameter slot, in order.
#[derive(Debug, Clone, Copy)]
pub enum LayerDef {
    Conv {
        stride: usize,
        pad: usize,
    },
    Pool(Pool2d),
    Relu,
    /// Reshape `(N, C, H, W)` to `(N, C·H·W)`.
    Flatten,
    FullyConnected,
}

/// A sequential CNN: layer definitions plus one [`ParamSlot`] per
/// parameterized layer, ending in logits (the softmax cross-entropy head is
/// applied by the trainer).
#[derive(Debug, Clone)]
pub struct ModelGraph {
    pub name: String,
    /// Expected input geometry `(channels, height, width)`.
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerDef>,
    pub slots: Vec<ParamSlot>,
}

/// Per-layer activations from a forward pass: `values[i]` is the *input* to
/// layer `i`; `values.last()` is the logits.
pub struct Activations {
    values: Vec<Tensor>,
}

impl Activations {
    pub fn logits(&self) -> &Tensor {
        self.values
            .last()
            .expect("forward stores at least the input")
    }
}

impl ModelGraph {
    /// Number of parameterized layers.
    pub fn param_layers(&self) -> usize {
        self.slots.len()
    }

    /// Total parameter count over all slots.
    pub fn param_count(&self) -> usize {
        self.slots.iter().map(ParamSlot::param_count).sum()
    }

    /// Mark the first `n` parameterized layers trainable and freeze the
    /// rest. `n = param_layers()` unfreezes everything.
    pub fn set_trainable_prefix(&mut self, n: usize) -> Result<()> {
        if n == 0 || n > self.slots.len() {
            return Err(Error::invalid(
                "set_trainable_prefix",
                format!(
                    "prefix {n} out of range for {} parameterized layers",
                    self.slots.len()
                ),
            ));
        }
        for (i, slot) in self.slots.iter_mut().enumerate() {
            slot.trainable = i < n;
        }
        Ok(())
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        let s = input.shape();
        let [c, h, w] = self.input_shape;
        if s.len() != 4 || s[1] != c || s[2] != h || s[3] != w {
            return Err(Error::shape(
                "model forward",
                format!("input {s:?} does not match expected (N, {c}, {h}, {w})"),
            ));
        }
        Ok(())
    }

    /// Forward pass to logits, keeping every intermediate activation for a
    /// later backward pass.
    pub fn forward(&self, input: &Tensor) -> Result<Activations> {
        self.check_input(input)?;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(input.clone());
        let mut slot_idx = 0;
        for layer in &self.layers {
            let x = values.last().unwrap();
            let y = match *layer {
                LayerDef::Conv { stride, pad } => {
                    let slot = &self.slots[slot_idx];
                    slot_idx += 1;
                    conv2d_forward(x, &slot.weights, &slot.bias, stride, pad)?
                }
                LayerDef::Pool(cfg) => pool2d_forward(x, cfg)?,
                LayerDef::Relu => relu_forward(x),
                LayerDef::Flatten => {
                    let mut y = x.clone();
                    let n = y.shape()[0];
                    let d = y.len() / n;
                    y.reshape(&[n, d])?;
                    y
                }
                LayerDef::FullyConnected => {
                    let slot = &self.slots[slot_idx];
                    slot_idx += 1;
                    fully_connected_forward(x, &slot.weights, &slot.bias)?
                }
            };
            values.push(y);
        }
        Ok(Activations { values })
    }

    /// Mean loss and error-count-free backward pass: computes the softmax
    /// cross-entropy against `labels`, backpropagates, and *overwrites* each
    /// slot's gradient buffers. Returns the mean loss.
    pub fn backward_from_loss(&mut self, acts: &Activations, labels: &[u8]) -> Result<f64> {
        let (loss, mut grad) = softmax_cross_entropy(acts.logits(), labels)?;
        let mut slot_idx = self.slots.len();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &acts.values[i];
            grad = match *layer {
                LayerDef::Conv { stride, pad } => {
                    slot_idx -= 1;
                    let slot = &mut self.slots[slot_idx];
                    let grads = conv2d_backward(x, &slot.weights, &grad, stride, pad)?;
                    slot.grad_weights = grads.weights;
                    slot.grad_bias = grads.bias;
                    grads.input
                }
                LayerDef::Pool(cfg) => pool2d_backward(x, &grad, cfg)?,
                LayerDef::Relu => relu_backward(x, &grad)?,
                LayerDef::Flatten => {
                    let mut g = grad;
                    g.reshape(x.shape())?;
                    g
                }
                LayerDef::FullyConnected => {
                    slot_idx -= 1;
                    let slot = &mut self.slots[slot_idx];
                    let grads = fully_connected_backward(x, &slot.weights, &grad)?;
                    slot.grad_weights = grads.weights;
                    slot.grad_bias = grads.bias;
                    grads.input
                }
            };
        }
        Ok(loss)
    }

    /// Logits only, discarding intermediates (evaluation path).
    pub fn logits(&self, input: &Tensor) -> Result<Tensor> {
        let mut acts = self.forward(input)?;
        Ok(acts
            .values
            .pop()
            .expect("forward stores at least the input"))
    }

    /// Output of the `ordinal`-th convolution layer (1-based), *before* any
    /// following activation — the feature maps the diagnostics read.
    pub fn conv_output(&self, input: &Tensor, ordinal: usize) -> Result<Tensor> {
        self.check_input(input)?;
        if ordinal == 0 {
            return Err(Error::invalid("conv_output", "ordinal is 1-based"));
        }
        let mut x = input.clone();
        let mut slot_idx = 0;
        let mut seen = 0;
        for layer in &self.layers {
            x = match *layer {
                LayerDef::Conv { stride, pad } => {
                    let slot = &self.slots[slot_idx];
                    slot_idx += 1;
                    let y = conv2d_forward(&x, &slot.weights, &slot.bias, stride, pad)?;
                    seen += 1;
                    if seen == ordinal {
                        return Ok(y);
                    }
                    y
                }
                LayerDef::Pool(cfg) => pool2d_forward(&x, cfg)?,
                LayerDef::Relu => relu_forward(&x),
                LayerDef::Flatten => {
                    let mut y = x;
                    let n = y.shape()[0];
                    let d = y.len() / n;
                    y.reshape(&[n, d])?;
                    y
                }
                LayerDef::FullyConnected => {
                    let slot = &self.slots[slot_idx];
                    slot_idx += 1;
                    fully_connected_forward(&x, &slot.weights, &slot.bias)?
                }
            };
        }
        Err(Error::invalid(
            "conv_output",
            format!("model has only {seen} convolution layers, asked for #{ordinal}"),
        ))
    }

    /// Human-readable architecture summary with parameter counts.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} (input {}x{}x{})\n",
            self.name, self.input_shape[0], self.input_shape[1], self.input_shape[2]
        );
        let mut slot_idx = 0;
        for layer in &self.layers {
            let line = match *layer {
                LayerDef::Conv { stride, pad } => {
                    let s = &self.slots[slot_idx];
                    slot_idx += 1;
                    let ws = s.weights.shape();
                    format!(
                        "  conv {:<8} {}x{}x{}->{} stride {stride} pad {pad}  ({} params)",
                        s.name,
                        ws[2],
                        ws[3],
                        ws[1],
                        ws[0],
                        s.param_count()
                    )
                }
                LayerDef::Pool(p) => format!(
                    "  pool {:?} {}x{} stride {} pad {}",
                    p.kind, p.window, p.window, p.stride, p.pad
                ),
                LayerDef::Relu => "  relu".to_string(),
                LayerDef::Flatten => "  flatten".to_string(),
                LayerDef::FullyConnected => {
                    let s = &self.slots[slot_idx];
                    slot_idx += 1;
                    let ws = s.weights.shape();
                    format!(
                        "  fc   {:<8} {}->{}  ({} params)",
                        s.name,
                        ws[1],
                        ws[0],
                        s.param_count()
                    )
                }
            };
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(&format!("  total params: {}\n", self.param_count()));
        out
    }
}

/// Gaussian N(0, 0.01²) weight init, zero biases — the classic toolbox
/// default for these nets.
fn init_slot(name: &str, weight_shape: &[usize], bias_len: usize, rng: &mut impl Rng) -> ParamSlot {
    let normal = Normal::new(0.0, 0.01).unwrap();
    let len: usize = weight_shape.iter().product();
    let weights = Tensor::from_vec(weight_shape, (0..len).map(|_| normal.sample(rng)).collect())
        .expect("length matches shape by construction");
    ParamSlot::new(name, weights, Tensor::zeros(&[bias_len]))
}

/// LeNet-5 as used for MNIST: conv 5×5×20 → maxpool 2/2 → conv 5×5×50 →
/// maxpool 2/2 → FC 500 → ReLU → FC 10. Four parameterized layers,
/// 431,080 parameters.
pub fn build_lenet5(seed: u64) -> ModelGraph {
    let mut rng = rng_from_seed(seed);
    let pool = Pool2d {
        kind: PoolKind::Max,
        window: 2,
        stride: 2,
        pad: 0,
    };
    ModelGraph {
        name: "lenet5".to_string(),
        input_shape: [1, 28, 28],
        layers: vec![
            LayerDef::Conv { stride: 1, pad: 0 },
            LayerDef::Pool(pool),
            LayerDef::Conv { stride: 1, pad: 0 },
            LayerDef::Pool(pool),
            LayerDef::Flatten,
            LayerDef::FullyConnected,
            LayerDef::Relu,
            LayerDef::FullyConnected,
        ],
        slots: vec![
            init_slot("conv1", &[20, 1, 5, 5], 20, &mut rng),
            init_slot("conv2", &[50, 20, 5, 5], 50, &mut rng),
            init_slot("fc1", &[500, 800], 500, &mut rng),
            init_slot("fc2", &[10, 500], 10, &mut rng),
        ],
    }
}

/// The compact CIFAR-10 reference net: three 5×5 conv + pool stages
/// (max, avg, avg, each 3/2 with pad 1) followed by FC 64 → FC 10. Five
/// parameterized layers, 145,578 parameters.
pub fn build_cifar10_quick(seed: u64) -> ModelGraph {
    let mut rng = rng_from_seed(seed);
    let pool = |kind| Pool2d {
        kind,
        window: 3,
        stride: 2,
        pad: 1,
    };
    ModelGraph {
        name: "cifar10-quick".to_string(),
        input_shape: [3, 32, 32],
        layers: vec![
            LayerDef::Conv { stride: 1, pad: 2 },
            LayerDef::Pool(pool(PoolKind::Max)),
            LayerDef::Relu,
            LayerDef::Conv { stride: 1, pad: 2 },
            LayerDef::Relu,
            LayerDef::Pool(pool(PoolKind::Avg)),
            LayerDef::Conv { stride: 1, pad: 2 },
            LayerDef::Relu,
            LayerDef::Pool(pool(PoolKind::Avg)),
            LayerDef::Flatten,
            LayerDef::FullyConnected,
            LayerDef::FullyConnected,
        ],
        slots: vec![
            init_slot("conv1", &[32, 3, 5, 5], 32, &mut rng),
            init_slot("conv2", &[32, 32, 5, 5], 32, &mut rng),
            init_slot("conv3", &[64, 32, 5, 5], 64, &mut rng),
            init_slot("fc1", &[64, 1024], 64, &mut rng),
            init_slot("fc2", &[10, 64], 10, &mut rng),
        ],
    }
}

/// Build a model by architecture name.
pub fn build_model(arch: &str, seed: u64) -> Result<ModelGraph> {
    match arch {
        "lenet5" => Ok(build_lenet5(seed)),
        "cifar10-quick" => Ok(build_cifar10_quick(seed)),
        other => Err(Error::invalid(
            "build_model",
            format!("unknown architecture {other:?}"),
        )),
    }
}
