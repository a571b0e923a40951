//! Minimal neural-network substrate: tensors, a parameter store with Adam,
//! a scalar reverse-mode tape, dense layers and checkpoints.

pub mod activation;
pub mod checkpoint;
pub mod dense;
pub mod params;
pub mod tape;
pub mod tensor;

pub use activation::{sigmoid, softplus, softplus_inv, Activation};
pub use checkpoint::{Checkpoint, CheckpointError};
pub use dense::{dense_forward, dense_forward_into, dense_tape};
pub use params::{clip_grad_norm, grad_norm, Gradients, ParamStore};
pub use tape::{ParamVars, Tape, Var};
pub use tensor::Tensor;
