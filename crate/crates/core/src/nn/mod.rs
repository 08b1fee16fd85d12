//! Small dense network with hand-written reverse-mode gradients.

mod adam;
mod dist;
mod net;
mod tensor;

pub use adam::AdamState;
pub use dist::{
    argmax, entropy, entropy_grad, kl_categorical, kl_categorical_grads, log_softmax, sample_action, softmax,
};
pub use net::{backward, backward_into, forward, ForwardCache, NetDims, PolicyOutput, PolicyParams};
pub use tensor::Tensor2;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
}
