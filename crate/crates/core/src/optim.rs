//! Parameter slots and momentum SGD.

use crate::tensor::Tensor;

/// One parameterized layer's state: weights and bias with their gradient and
/// velocity buffers, plus a trainable flag used for layer freezing.
#[derive(Debug, Clone)]
pub struct ParamSlot {
    pub name: String,
    pub weights: Tensor,
    pub bias: Tensor,
    pub grad_weights: Tensor,
    pub grad_bias: Tensor,
    pub vel_weights: Tensor,
    pub vel_bias: Tensor,
    pub trainable: bool,
}

impl ParamSlot {
    pub fn new(name: impl Into<String>, weights: Tensor, bias: Tensor) -> ParamSlot {
        let grad_weights = Tensor::zeros(weights.shape());
        let grad_bias = Tensor::zeros(bias.shape());
        let vel_weights = Tensor::zeros(weights.shape());
        let vel_bias = Tensor::zeros(bias.shape());
        ParamSlot {
            name: name.into(),
            weights,
            bias,
            grad_weights,
            grad_bias,
            vel_weights,
            vel_bias,
            trainable: true,
        }
    }

    pub fn zero_grads(&mut self) {
        self.grad_weights.fill_zero();
        self.grad_bias.fill_zero();
    }

    /// Number of parameters (weights + bias) in this slot.
    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Hyperparameters for one SGD step.
#[derive(Debug, Clone, Copy)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

/// One momentum-SGD step over every trainable slot:
///
/// ```text
/// v ← momentum · v + (grad + weight_decay · w)
/// w ← w − lr · v
/// ```
///
/// Frozen slots are untouched — neither weights nor velocities change.
pub fn sgd_step(slots: &mut [ParamSlot], cfg: SgdConfig) {
    for slot in slots.iter_mut().filter(|s| s.trainable) {
        apply(
            &mut slot.weights,
            &mut slot.vel_weights,
            &slot.grad_weights,
            cfg,
        );
        apply(&mut slot.bias, &mut slot.vel_bias, &slot.grad_bias, cfg);
    }
}

fn apply(param: &mut Tensor, vel: &mut Tensor, grad: &Tensor, cfg: SgdConfig) {
    let p = param.data_mut();
    let v = vel.data_mut();
    let g = grad.data();
    for i in 0..p.len() {
        v[i] = cfg.momentum * v[i] + (g[i] + cfg.weight_decay * p[i]);
        p[i] -= cfg.lr * v[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(w: f64) -> ParamSlot {
        ParamSlot::new(
            "t",
            Tensor::from_vec(&[1], vec![w]).unwrap(),
            Tensor::zeros(&[1]),
        )
    }

    fn set_grad(s: &mut ParamSlot, g: f64) {
        s.grad_weights.data_mut()[0] = g;
    }

    #[test]
    fn plain_step() {
        // w = 1, grad = 1, lr = 0.1, no momentum, no decay → w = 0.9
        let mut s = slot(1.0);
        set_grad(&mut s, 1.0);
        sgd_step(
            std::slice::from_mut(&mut s),
            SgdConfig {
                lr: 0.1,
                momentum: 0.0,
                weight_decay: 0.0,
            },
        );
        assert_eq!(s.weights.data()[0], 0.9);
    }

    #[test]
    fn momentum_accumulates_velocity() {
        // Two steps with grad 1, momentum 0.9, lr 0.1:
        // step 1: v = 1,   w = 0.9
        // step 2: v = 1.9, w = 0.9 − 0.19 = 0.71
        let mut s = slot(1.0);
        let cfg = SgdConfig {
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
        };
        set_grad(&mut s, 1.0);
        sgd_step(std::slice::from_mut(&mut s), cfg);
        assert!((s.weights.data()[0] - 0.9).abs() < 1e-15);
        set_grad(&mut s, 1.0);
        sgd_step(std::slice::from_mut(&mut s), cfg);
        assert!((s.vel_weights.data()[0] - 1.9).abs() < 1e-15);
        assert!((s.weights.data()[0] - 0.71).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_shrinks_weights() {
        // w = 1, grad = 0, lr = 0.1, decay = 0.5 → w = 1 − 0.1·0.5 = 0.95
        let mut s = slot(1.0);
        sgd_step(
            std::slice::from_mut(&mut s),
            SgdConfig {
                lr: 0.1,
                momentum: 0.0,
                weight_decay: 0.5,
            },
        );
        assert!((s.weights.data()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn frozen_slot_is_untouched() {
        let mut s = slot(1.0);
        s.trainable = false;
        set_grad(&mut s, 123.0);
        sgd_step(
            std::slice::from_mut(&mut s),
            SgdConfig {
                lr: 0.1,
                momentum: 0.9,
                weight_decay: 0.1,
            },
        );
        assert_eq!(s.weights.data()[0], 1.0);
        assert_eq!(s.vel_weights.data()[0], 0.0);
    }
}
