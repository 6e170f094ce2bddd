//! Minimal f64 tensor engine with reverse-mode automatic differentiation.
//!
//! Only the layers the flow autoencoder and the flow classifier need are here:
//! 3x3 convolution, ReLU, 2x max pooling, nearest 2x upsampling, channel
//! concatenation, dense layers, and the training losses. Parameters live in a
//! [`ParamStore`] and are brought onto a [`Graph`] per forward pass.

mod adam;
pub mod check;
mod error;
mod gemm;
mod graph;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use error::{NnError, Result};
pub use graph::{softmax_rows, Gradients, Graph, Var};
pub use params::{
    read_checkpoint, write_checkpoint, ParamId, ParamStore, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use tensor::Tensor;
