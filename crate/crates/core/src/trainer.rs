//! Mini-batch SGD training loop, evaluation, and the named training
//! protocols (retrain / fine-tune schedules for both reference nets).

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::ModelGraph;
use crate::optim::{sgd_step, SgdConfig};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tensor::Tensor;

/// Input preprocessing: raw pixel value minus the per-pixel mean image of
/// the training split the model is (or was) trained on.
#[derive(Debug, Clone)]
pub struct Preprocess {
    /// One entry per pixel position (`channels·height·width`).
    pub mean: Vec<f64>,
}

impl Preprocess {
    /// Fit the mean image on a training split.
    pub fn fit(ds: &LabeledDataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::invalid(
                "preprocess",
                "cannot fit on an empty dataset",
            ));
        }
        let image_len = ds.image_len();
        let mut mean = vec![0.0; image_len];
        for i in 0..ds.len() {
            for (m, &b) in mean.iter_mut().zip(ds.image(i)) {
                *m += b as f64;
            }
        }
        let n = ds.len() as f64;
        for m in &mut mean {
            *m /= n;
        }
        Ok(Self { mean })
    }

    /// A no-op preprocessor (zero mean) for synthetic tests.
    pub fn identity(image_len: usize) -> Self {
        Self {
            mean: vec![0.0; image_len],
        }
    }

    /// Assemble the images at `indices` into an `(N, C, H, W)` f64 batch,
    /// subtracting the mean image.
    pub fn batch(&self, ds: &LabeledDataset, indices: &[usize]) -> Result<Tensor> {
        let image_len = ds.image_len();
        if self.mean.len() != image_len {
            return Err(Error::shape(
                "preprocess batch",
                format!(
                    "mean has {} entries but images have {image_len} pixels",
                    self.mean.len()
                ),
            ));
        }
        let mut data = Vec::with_capacity(indices.len() * image_len);
        for &i in indices {
            let img = ds.image(i);
            data.extend(img.iter().zip(&self.mean).map(|(&b, &m)| b as f64 - m));
        }
        Tensor::from_vec(&[indices.len(), ds.channels, ds.height, ds.width], data)
    }
}

/// One constant-rate stretch of the schedule; epochs are 1-based and both
/// ends are inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrBand {
    pub from_epoch: usize,
    pub to_epoch: usize,
    pub lr: f64,
}

/// Which parameterized layers train: everything, or only the first N
/// (the fine-tuning regimes freeze the tail).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreezeDepth {
    All,
    FirstN(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub schedule: Vec<LrBand>,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub freeze: FreezeDepth,
    /// Seeds the per-epoch shuffle stream (independent of model init).
    pub seed: u64,
}

impl TrainConfig {
    /// Schedule bands must tile `1..=epochs` exactly — no gaps, no
    /// overlaps — with finite, non-negative rates. (A zero rate is legal:
    /// it expresses the identity run used to pin the no-update contract;
    /// every named protocol uses strictly positive rates.)
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("train config", "epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("train config", "batch_size must be >= 1"));
        }
        let mut next = 1;
        for band in &self.schedule {
            if band.from_epoch != next {
                return Err(Error::invalid(
                    "train config",
                    format!(
                        "schedule band starts at epoch {} but epoch {next} is next \
                         (bands must tile 1..=epochs contiguously)",
                        band.from_epoch
                    ),
                ));
            }
            if band.to_epoch < band.from_epoch {
                return Err(Error::invalid(
                    "train config",
                    format!("band {}..={} is empty", band.from_epoch, band.to_epoch),
                ));
            }
            if !band.lr.is_finite() || band.lr < 0.0 {
                return Err(Error::invalid(
                    "train config",
                    format!(
                        "learning rate {} is not a finite non-negative value",
                        band.lr
                    ),
                ));
            }
            next = band.to_epoch + 1;
        }
        if next != self.epochs + 1 {
            return Err(Error::invalid(
                "train config",
                format!(
                    "schedule covers epochs 1..={} but the run has {} epochs",
                    next - 1,
                    self.epochs
                ),
            ));
        }
        if !self.momentum.is_finite() || self.momentum < 0.0 || self.momentum >= 1.0 {
            return Err(Error::invalid(
                "train config",
                format!("momentum {} outside [0, 1)", self.momentum),
            ));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::invalid(
                "train config",
                format!(
                    "weight decay {} is not a finite non-negative value",
                    self.weight_decay
                ),
            ));
        }
        Ok(())
    }

    /// Learning rate for a 1-based epoch (validated schedules always match).
    pub fn lr_for_epoch(&self, epoch: usize) -> f64 {
        for band in &self.schedule {
            if (band.from_epoch..=band.to_epoch).contains(&epoch) {
                return band.lr;
            }
        }
        panic!("epoch {epoch} outside validated schedule");
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub test_error: f64,
    pub seconds: f64,
}

/// Full history of a training run plus the exact configuration that
/// produced it (batch size / momentum / decay are our defaults, so they are
/// logged rather than assumed).
#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub config: TrainConfig,
    pub epochs: Vec<EpochMetrics>,
}

impl RunMetrics {
    pub fn final_test_error(&self) -> f64 {
        self.epochs.last().map(|e| e.test_error).unwrap_or(f64::NAN)
    }

    /// CSV with one row per epoch: `epoch, lr, train_loss, test_error, seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,train_loss,test_error,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.3}\n",
                e.epoch, e.lr, e.train_loss, e.test_error, e.seconds
            ));
        }
        out
    }
}

/// Top-1 error rate in `[0, 1]`. Prediction is the argmax over logits; ties
/// resolve to the lowest class index.
pub fn evaluate(
    model: &ModelGraph,
    ds: &LabeledDataset,
    pre: &Preprocess,
    batch_size: usize,
) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::invalid("evaluate", "empty dataset"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("evaluate", "batch_size must be >= 1"));
    }
    let indices: Vec<usize> = (0..ds.len()).collect();
    let mut wrong = 0usize;
    for chunk in indices.chunks(batch_size) {
        let x = pre.batch(ds, chunk)?;
        let logits = model.logits(&x)?;
        let classes = logits.shape()[1];
        for (row, &i) in chunk.iter().enumerate() {
            let scores = &logits.data()[row * classes..(row + 1) * classes];
            let mut best = 0;
            for (c, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = c;
                }
            }
            if best != ds.label(i) as usize {
                wrong += 1;
            }
        }
    }
    Ok(wrong as f64 / ds.len() as f64)
}

/// Shuffled mini-batch SGD per `cfg`. Deterministic given the config seed
/// and the model's initial state; leaves `model` at the final epoch.
pub fn train(
    model: &mut ModelGraph,
    train_ds: &LabeledDataset,
    test_ds: &LabeledDataset,
    pre: &Preprocess,
    cfg: &TrainConfig,
) -> Result<RunMetrics> {
    cfg.validate()?;
    if train_ds.is_empty() {
        return Err(Error::invalid("train", "empty training dataset"));
    }
    if test_ds.is_empty() {
        return Err(Error::invalid("train", "empty test dataset"));
    }
    match cfg.freeze {
        FreezeDepth::All => model.set_trainable_prefix(model.param_layers())?,
        FreezeDepth::FirstN(n) => model.set_trainable_prefix(n)?,
    }

    let mut indices: Vec<usize> = (0..train_ds.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let lr = cfg.lr_for_epoch(epoch);
        let sgd = SgdConfig {
            lr,
            momentum: cfg.momentum,
            weight_decay: cfg.weight_decay,
        };
        let mut rng = rng_from_seed(derive_seed(cfg.seed, epoch as u64));
        indices.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for (batch_idx, chunk) in indices.chunks(cfg.batch_size).enumerate() {
            let x = pre.batch(train_ds, chunk)?;
            let labels: Vec<u8> = chunk.iter().map(|&i| train_ds.label(i)).collect();
            let acts = model.forward(&x)?;
            let loss = model.backward_from_loss(&acts, &labels)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            sgd_step(&mut model.slots, sgd);
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / train_ds.len() as f64;
        let test_error = evaluate(model, test_ds, pre, cfg.batch_size)?;
        history.push(EpochMetrics {
            epoch,
            lr,
            train_loss,
            test_error,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(RunMetrics {
        config: cfg.clone(),
        epochs: history,
    })
}

fn flat(epochs: usize, lr: f64) -> Vec<LrBand> {
    vec![LrBand {
        from_epoch: 1,
        to_epoch: epochs,
        lr,
    }]
}

/// LeNet retraining: fresh init, lr 1e-3 for 20 epochs, everything trainable.
pub fn mnist_retrain(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 20,
        schedule: flat(20, 1e-3),
        batch_size: 100,
        momentum: 0.9,
        weight_decay: 0.0,
        freeze: FreezeDepth::All,
        seed,
    }
}

/// LeNet fine-tuning: lr 1e-5 (1% of the retraining rate) for 15 epochs,
/// only the first `n` parameterized layers trainable.
pub fn mnist_finetune(n: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 15,
        schedule: flat(15, 1e-5),
        batch_size: 100,
        momentum: 0.9,
        weight_decay: 0.0,
        freeze: FreezeDepth::FirstN(n),
        seed,
    }
}

/// CIFAR10-quick retraining: 45 epochs in three bands
/// (5e-2 for 1–30, 5e-3 for 31–40, 5e-4 for 41–45), weight decay 1e-4.
pub fn cifar_retrain(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 45,
        schedule: vec![
            LrBand {
                from_epoch: 1,
                to_epoch: 30,
                lr: 5e-2,
            },
            LrBand {
                from_epoch: 31,
                to_epoch: 40,
                lr: 5e-3,
            },
            LrBand {
                from_epoch: 41,
                to_epoch: 45,
                lr: 5e-4,
            },
        ],
        batch_size: 100,
        momentum: 0.9,
        weight_decay: 1e-4,
        freeze: FreezeDepth::All,
        seed,
    }
}

/// CIFAR10-quick fine-tuning: 30 epochs (5e-4 for 1–25, 5e-5 for 26–30),
/// first `n` parameterized layers trainable.
pub fn cifar_finetune(n: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 30,
        schedule: vec![
            LrBand {
                from_epoch: 1,
                to_epoch: 25,
                lr: 5e-4,
            },
            LrBand {
                from_epoch: 26,
                to_epoch: 30,
                lr: 5e-5,
            },
        ],
        batch_size: 100,
        momentum: 0.9,
        weight_decay: 0.0,
        freeze: FreezeDepth::FirstN(n),
        seed,
    }
}

/// Reduced CIFAR retraining for subset-scale runs: the 45-epoch schedule
/// compressed proportionally to 15 epochs (5e-2 for 1–10, 5e-3 for 11–13,
/// 5e-4 for 14–15).
pub fn cifar_retrain_reduced(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 15,
        schedule: vec![
            LrBand {
                from_epoch: 1,
                to_epoch: 10,
                lr: 5e-2,
            },
            LrBand {
                from_epoch: 11,
                to_epoch: 13,
                lr: 5e-3,
            },
            LrBand {
                from_epoch: 14,
                to_epoch: 15,
                lr: 5e-4,
            },
        ],
        batch_size: 100,
        momentum: 0.9,
        weight_decay: 1e-4,
        freeze: FreezeDepth::All,
        seed,
    }
}

/// Reduced CIFAR fine-tuning: 10 epochs (5e-4 for 1–8, 5e-5 for 9–10).
pub fn cifar_finetune_reduced(n: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 10,
        schedule: vec![
            LrBand {
                from_epoch: 1,
                to_epoch: 8,
                lr: 5e-4,
            },
            LrBand {
                from_epoch: 9,
                to_epoch: 10,
                lr: 5e-5,
            },
        ],
        batch_size: 100,
        momentum: 0.9,
        weight_decay: 0.0,
        freeze: FreezeDepth::FirstN(n),
        seed,
    }
}
