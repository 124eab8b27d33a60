//! CNN layers with hand-derived forward/backward passes.
//!
//! All gradients follow the mean-loss convention: the loss layer divides by
//! the batch size, so parameter gradients coming out of a backward pass are
//! already batch means. Every reduction runs in a fixed sequential order, so
//! results are bit-reproducible across runs.

mod activation;
mod conv;
mod dense;
mod loss;
pub mod matmul;
mod pool;

pub use activation::{relu_backward, relu_forward};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads};
pub use dense::{fully_connected_backward, fully_connected_forward, DenseGrads};
pub use loss::softmax_cross_entropy;
pub use pool::{pool2d_backward, pool2d_forward, Pool2d, PoolKind};
