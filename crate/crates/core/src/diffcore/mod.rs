//! Minimal differentiable core: dense networks, a reverse-mode tape, momentum
//! SGD and a finite-difference gradient checker.

mod gradcheck;
mod graph;
mod mlp;
mod optim;
mod tensor;

pub use gradcheck::grad_check;
pub use graph::{euclidean, gelu, gelu_grad, log_sum_exp, Gradients, Graph, Var};
pub use mlp::{Activation, BoundParams, Layer, ParamStore, Parameters};
pub use optim::{cosine_lr, Sgd};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("backward needs a scalar root, got a {0}x{1} tensor")]
    NonScalarRoot(usize, usize),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Scalar loss together with its gradient for every parameter.
#[derive(Clone, Debug)]
pub struct GradResult<P> {
    pub loss: f64,
    pub grads: P,
}
