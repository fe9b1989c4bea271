//! Minimal reverse-mode automatic differentiation over dense tensors.
//!
//! Graphs are built eagerly while ops run and live as long as the tensors that reference
//! them. Backward rules are themselves recorded ops, so `grad(.., create_graph = true)`
//! yields differentiable gradients (needed for gradient-norm penalties).

mod conv;
mod error;
mod gradcheck;
mod graph;
mod nn;
mod ops;
mod tensor;

pub use conv::ConvSpec;
pub use error::{Result, TensorError};
pub use gradcheck::grad_check;
pub use graph::grad;
pub use tensor::{is_grad_enabled, nan_check_enabled, no_grad, set_nan_check, with_grad_mode, Tensor};
