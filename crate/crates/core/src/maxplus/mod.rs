//! The max-plus layer and the block built around it.
//!
//! For inputs `y` (`B x J`) and weights `wm` (`J x K`) the layer computes
//!
//! ```text
//! z[b, k] = max_j ( y[b, j] + wm[j, k] )
//! ```
//!
//! which is a dilation in the (max, +) semiring: it commutes with suprema,
//! is monotone, and shifting every input by `c` shifts every output by `c`.
//! A [`MaxPlusBlock`] puts a bias-free linear layer `y = x · wf` in front.
//!
//! The backward pass is the usual subgradient of a max: each `(b, k)` sends
//! its incoming gradient to exactly one `j`, the recorded winner.

mod dropout;
mod maxout;
mod pwl;
mod selection;

use alloc::vec;
use alloc::vec::Vec;

pub use dropout::{draw_connection_mask, DropMask};
pub use maxout::{maxout_backward, maxout_head};
pub use pwl::{build_pwl_block, PwlBlock, PwlSpec};
pub use selection::{detect_collisions, select_filters, Collision, FilterSelection};

use crate::error::{dim_err, Error, Result};
use crate::tensor::{matmul, Tensor};

/// Winning input index for every `(sample, output)` pair of a max-plus or
/// maxout forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Winners {
    batch: usize,
    outputs: usize,
    index: Vec<usize>,
}

impl Winners {
    pub(crate) fn new(batch: usize, outputs: usize, index: Vec<usize>) -> Self {
        debug_assert_eq!(index.len(), batch * outputs);
        Self { batch, outputs, index }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn get(&self, b: usize, k: usize) -> usize {
        self.index[b * self.outputs + k]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.index
    }
}

/// A bias-free dense layer (`wf`, `I x J`) followed by a max-plus layer
/// (`wm`, `J x K`).
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPlusBlock {
    wf: Tensor,
    wm: Tensor,
}

impl MaxPlusBlock {
    pub fn new(wf: Tensor, wm: Tensor) -> Result<Self> {
        let (_, j) = wf.dims2()?;
        let (j2, k) = wm.dims2()?;
        if j != j2 {
            return Err(dim_err!("wf has {j} columns but wm has {j2} rows"));
        }
        if !wf.is_finite() {
            return Err(Error::Domain("wf must be finite".into()));
        }
        check_columns(&wm, k)?;
        Ok(Self { wf, wm })
    }

    pub fn wf(&self) -> &Tensor {
        &self.wf
    }

    pub fn wm(&self) -> &Tensor {
        &self.wm
    }

    /// Input width `I`.
    pub fn inputs(&self) -> usize {
        self.wf.shape()[0]
    }

    /// Number of linear filters `J`.
    pub fn units(&self) -> usize {
        self.wf.shape()[1]
    }

    /// Number of max-plus outputs `K`.
    pub fn outputs(&self) -> usize {
        self.wm.shape()[1]
    }

    pub(crate) fn params_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.wf, &mut self.wm]
    }

    /// Replaces one max-plus weight, keeping the column invariant.
    pub fn set_wm(&mut self, j: usize, k: usize, value: f64) -> Result<()> {
        let old = self.wm.get(&[j, k])?;
        self.wm.set(&[j, k], value)?;
        if let Err(e) = check_columns(&self.wm, self.outputs()) {
            self.wm.set(&[j, k], old)?;
            return Err(e);
        }
        Ok(())
    }

    /// Linear filter responses `y = x · wf`.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        matmul(x, &self.wf)
    }

    /// Unmasked block output `z`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(maxplus_forward(&self.features(x)?, &self.wm, None)?.0)
    }
}

fn check_columns(wm: &Tensor, k: usize) -> Result<()> {
    let data = wm.data();
    for c in 0..k {
        if !data.iter().skip(c).step_by(k).any(|v| v.is_finite()) {
            return Err(Error::DegenerateColumn { column: c });
        }
    }
    Ok(())
}

/// `z[b, k] = max over active j of (y[b, j] + wm[j, k])`.
///
/// Masked connections are left out of the max. Ties go to the lowest `j`.
pub fn maxplus_forward(y: &Tensor, wm: &Tensor, mask: Option<&DropMask>) -> Result<(Tensor, Winners)> {
    let (b, j) = y.dims2()?;
    let (j2, k) = wm.dims2()?;
    if j != j2 {
        return Err(dim_err!("y has {j} columns but wm has {j2} rows"));
    }
    if !y.is_finite() {
        return Err(Error::Domain("max-plus input contains -inf".into()));
    }
    if let Some(m) = mask {
        if m.units() != j || m.outputs() != k {
            return Err(dim_err!("mask is {}x{}, weights are {j}x{k}", m.units(), m.outputs()));
        }
    }
    let w = wm.data();
    let mut z = Vec::with_capacity(b * k);
    let mut win = Vec::with_capacity(b * k);
    for r in 0..b {
        let yr = y.row(r);
        for c in 0..k {
            let mut best = usize::MAX;
            let mut best_v = f64::NEG_INFINITY;
            for (jj, &yv) in yr.iter().enumerate() {
                if let Some(m) = mask {
                    if !m.is_active(jj, c) {
                        continue;
                    }
                }
                let v = yv + w[jj * k + c];
                if v > best_v {
                    best_v = v;
                    best = jj;
                }
            }
            if best == usize::MAX {
                return Err(Error::DegenerateColumn { column: c });
            }
            z.push(best_v);
            win.push(best);
        }
    }
    Ok((Tensor::from_arithmetic(vec![b, k], z)?, Winners::new(b, k, win)))
}

/// Subgradient of [`maxplus_forward`].
///
/// Returns `(grad_y, grad_wm)` where each `grad_z[b, k]` lands on
/// `grad_y[b, w]` and `grad_wm[w, k]` for the recorded winner `w`.
pub fn maxplus_backward(grad_z: &Tensor, winners: &Winners, units: usize) -> Result<(Tensor, Tensor)> {
    let (b, k) = grad_z.dims2()?;
    if winners.batch != b || winners.outputs != k {
        return Err(dim_err!(
            "gradient is {b}x{k}, winners are {}x{}",
            winners.batch,
            winners.outputs
        ));
    }
    let mut gy = vec![0.0; b * units];
    let mut gw = vec![0.0; units * k];
    for r in 0..b {
        for c in 0..k {
            let j = winners.get(r, c);
            if j >= units {
                return Err(Error::Internal(alloc::format!("winner {j} out of range for {units} units")));
            }
            let g = grad_z.data()[r * k + c];
            gy[r * units + j] += g;
            gw[j * k + c] += g;
        }
    }
    Ok((Tensor::from_arithmetic(vec![b, units], gy)?, Tensor::from_arithmetic(vec![units, k], gw)?))
}
