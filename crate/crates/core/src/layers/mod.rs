//! Conventional layers with exact backward passes.
//!
//! Every layer is bias-free. Backward functions take the forward inputs (or
//! the indices a forward pass recorded) plus the gradient of a scalar loss
//! with respect to the layer output.

mod activation;
mod conv;
mod dense;
mod loss;
mod pool;

pub use activation::{relu, relu_backward};
pub use conv::{conv2d, conv2d_backward, ConvGrads, ConvParams};
pub use dense::{dense, dense_backward, dense_weight_grad, DenseGrads, DenseParams};
pub use loss::{softmax, softmax_xent};
pub use pool::{maxpool2x2, maxpool2x2_backward, PoolIndices};
