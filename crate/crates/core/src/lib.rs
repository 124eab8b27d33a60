//! Distortion-robustness laboratory.
//!
//! Everything needed to reproduce a classic robustness study end to end, with
//! no ML framework: synthesize motion-blur, defocus-blur, and additive-noise
//! distortions over MNIST/CIFAR-10; train small CNNs with hand-derived
//! gradients under no-training, first-N fine-tuning, and re-training regimes;
//! and measure the feature-map gradient-magnitude variance diagnostic.

pub mod checkpoint;
pub mod dataset;
pub mod diagnostics;
pub mod distortion;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod models;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use error::{DatasetError, Error, Result};
pub use optim::{sgd_step, ParamSlot, SgdConfig};
pub use tensor::Tensor;
