use alloc::vec::Vec;

use crate::error::{dim_err, Result};
use crate::tensor::Tensor;

/// Elementwise `max(0, x)`.
pub fn relu(x: &Tensor) -> Tensor {
    Tensor::from_raw(x.shape().to_vec(), x.data().iter().map(|&v| v.max(0.0)).collect())
}

/// Passes the gradient where `x > 0`; the subgradient at 0 is 0.
pub fn relu_backward(x: &Tensor, grad: &Tensor) -> Result<Tensor> {
    if x.shape() != grad.shape() {
        return Err(dim_err!("relu backward: {:?} vs {:?}", x.shape(), grad.shape()));
    }
    let data: Vec<f64> =
        x.data().iter().zip(grad.data()).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect();
    Ok(Tensor::from_raw(x.shape().to_vec(), data))
}
