use crate::error::{dim_err, Error, Result};
use crate::tensor::{matmul, matmul_nt, matmul_tn, Tensor};

/// Weights of a bias-free fully connected layer, `I x J`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weights: Tensor,
}

impl DenseParams {
    pub fn new(weights: Tensor) -> Result<Self> {
        weights.dims2()?;
        if !weights.is_finite() {
            return Err(Error::Domain("dense weights must be finite".into()));
        }
        Ok(Self { weights })
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
}

/// `y = x · w`.
pub fn dense(x: &Tensor, p: &DenseParams) -> Result<Tensor> {
    matmul(x, &p.weights)
}

pub fn dense_backward(x: &Tensor, p: &DenseParams, grad_y: &Tensor) -> Result<DenseGrads> {
    check_grad_shape(x, p, grad_y)?;
    Ok(DenseGrads {
        input: matmul_nt(grad_y, &p.weights)?,
        weights: matmul_tn(x, grad_y)?,
    })
}

/// Weight gradient only, for layers whose input needs no gradient.
pub fn dense_weight_grad(x: &Tensor, grad_y: &Tensor) -> Result<Tensor> {
    matmul_tn(x, grad_y)
}

fn check_grad_shape(x: &Tensor, p: &DenseParams, grad_y: &Tensor) -> Result<()> {
    let (b, i) = x.dims2()?;
    let (gb, gj) = grad_y.dims2()?;
    if i != p.inputs() || gb != b || gj != p.outputs() {
        return Err(dim_err!(
            "dense backward: x {:?}, weights {:?}, grad {:?}",
            x.shape(),
            p.weights.shape(),
            grad_y.shape()
        ));
    }
    Ok(())
}
