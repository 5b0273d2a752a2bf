//! Two-output max-plus blocks that compute a difference of two maxes of
//! affine functions.
//!
//! Any continuous piecewise-linear `g` on a compact set can be written as
//!
//! ```text
//! g(x) = max_j (W1_j · x + b1_j) - max_j (W2_j · x + b2_j)
//! ```
//!
//! Stacking `W1` and `W2` as the linear filters and routing `b1` to the first
//! output and `b2` to the second (with `-inf` for the other half) makes
//! `z1 - z2` of a max-plus block reproduce `g` exactly. Since such `g` are
//! dense among continuous functions, two outputs suffice to approximate any
//! continuous function arbitrarily well.

use alloc::vec;
use alloc::vec::Vec;

use super::MaxPlusBlock;
use crate::error::{dim_err, Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{seeded_uniform, Tensor};

/// `g(x) = max(W1 x + b1) - max(W2 x + b2)` with `k` affine pieces per part.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlSpec {
    w1: Tensor,
    b1: Vec<f64>,
    w2: Tensor,
    b2: Vec<f64>,
}

impl PwlSpec {
    pub fn new(w1: Tensor, b1: Vec<f64>, w2: Tensor, b2: Vec<f64>) -> Result<Self> {
        let (k, i) = w1.dims2()?;
        if w2.dims2()? != (k, i) || b1.len() != k || b2.len() != k {
            return Err(dim_err!(
                "PWL parts disagree: W1 {:?}, b1 {}, W2 {:?}, b2 {}",
                w1.shape(),
                b1.len(),
                w2.shape(),
                b2.len()
            ));
        }
        if !w1.is_finite() || !w2.is_finite() || !b1.iter().chain(&b2).all(|v| v.is_finite()) {
            return Err(Error::Domain("PWL coefficients must be finite".into()));
        }
        Ok(Self { w1, b1, w2, b2 })
    }

    /// `|x| = max(x, -x) - max(0, 0)`.
    pub fn abs() -> Self {
        Self::new(
            Tensor::from_rows(&[[1.0], [-1.0]]).unwrap(),
            vec![0.0, 0.0],
            Tensor::zeros(&[2, 1]),
            vec![0.0, 0.0],
        )
        .unwrap()
    }

    /// `relu(x) = max(x, 0) - max(0, 0)`.
    pub fn relu() -> Self {
        Self::new(
            Tensor::from_rows(&[[1.0], [0.0]]).unwrap(),
            vec![0.0, 0.0],
            Tensor::zeros(&[2, 1]),
            vec![0.0, 0.0],
        )
        .unwrap()
    }

    /// Coefficients drawn uniformly from `[-1, 1)`.
    pub fn random(rng: &mut SeededRng, pieces: usize, inputs: usize) -> Result<Self> {
        let w1 = seeded_uniform(rng, &[pieces, inputs], -1.0, 1.0)?;
        let b1 = seeded_uniform(rng, &[pieces], -1.0, 1.0)?.into_data();
        let w2 = seeded_uniform(rng, &[pieces, inputs], -1.0, 1.0)?;
        let b2 = seeded_uniform(rng, &[pieces], -1.0, 1.0)?.into_data();
        Self::new(w1, b1, w2, b2)
    }

    /// `max(W1 x + b1) - max(W2 x + b2)` evaluated term by term.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.inputs() {
            return Err(dim_err!("PWL expects {} inputs, got {}", self.inputs(), x.len()));
        }
        let part = |w: &Tensor, b: &[f64]| {
            b.iter()
                .enumerate()
                .map(|(j, bj)| w.row(j).iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + bj)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        Ok(part(&self.w1, &self.b1) - part(&self.w2, &self.b2))
    }

    pub fn pieces(&self) -> usize {
        self.b1.len()
    }

    pub fn inputs(&self) -> usize {
        self.w1.shape()[1]
    }

    pub fn w1(&self) -> &Tensor {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &Tensor {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }
}

/// A `K = 2` max-plus block whose output difference is the PWL function.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlBlock {
    block: MaxPlusBlock,
}

impl PwlBlock {
    pub fn block(&self) -> &MaxPlusBlock {
        &self.block
    }

    /// `z1(x) - z2(x)` for each row of `x` (`B x I`).
    pub fn evaluate_batch(&self, x: &Tensor) -> Result<Vec<f64>> {
        let z = self.block.forward(x)?;
        Ok((0..z.shape()[0]).map(|r| z.row(r)[0] - z.row(r)[1]).collect())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let x = Tensor::new(vec![1, x.len()], x.to_vec())?;
        Ok(self.evaluate_batch(&x)?[0])
    }
}

/// `wf = [W1; W2]ᵀ` (`I x 2k`); `wm` column 1 is `[b1; -inf]`, column 2 is
/// `[-inf; b2]`.
pub fn build_pwl_block(spec: &PwlSpec) -> Result<PwlBlock> {
    let (k, i) = spec.w1.dims2()?;
    let mut wf = Vec::with_capacity(i * 2 * k);
    for ii in 0..i {
        wf.extend((0..k).map(|j| spec.w1.row(j)[ii]));
        wf.extend((0..k).map(|j| spec.w2.row(j)[ii]));
    }
    let mut wm = Vec::with_capacity(2 * k * 2);
    for &b in &spec.b1 {
        wm.extend([b, f64::NEG_INFINITY]);
    }
    for &b in &spec.b2 {
        wm.extend([f64::NEG_INFINITY, b]);
    }
    let block = MaxPlusBlock::new(Tensor::new(vec![i, 2 * k], wf)?, Tensor::new(vec![2 * k, 2], wm)?)?;
    Ok(PwlBlock { block })
}
