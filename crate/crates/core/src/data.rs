//! In-memory labelled image sets.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{arg_err, dim_err, Error, Result};
use crate::tensor::Tensor;

pub const NUM_CLASSES: usize = 10;

/// Channel count and spatial size of each image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageDims {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageDims {
    pub const MNIST: Self = Self { channels: 1, height: 28, width: 28 };
    pub const CIFAR10: Self = Self { channels: 3, height: 32, width: 32 };

    pub fn features(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Images stored flat as `N x (C*H*W)` with values in `[0, 1]`, plus labels
/// in `[0, 10)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Tensor,
    labels: Vec<usize>,
    dims: ImageDims,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, dims: ImageDims) -> Result<Self> {
        let (n, d) = images.dims2()?;
        if d != dims.features() {
            return Err(dim_err!("images have {d} features, dims {dims:?} need {}", dims.features()));
        }
        if labels.len() != n {
            return Err(dim_err!("{n} images but {} labels", labels.len()));
        }
        if let Some(pos) = labels.iter().position(|&l| l >= NUM_CLASSES) {
            return Err(arg_err!("label {} at index {pos} outside [0, {NUM_CLASSES})", labels[pos]));
        }
        if let Some(pos) = images.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!("pixel {pos} = {} outside [0, 1]", images.data()[pos])));
        }
        Ok(Self { images, labels, dims })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    /// Images and labels for the given sample indices, in that order.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let x = self.images.select_rows(indices)?;
        let y = indices.iter().map(|&i| self.labels[i]).collect();
        Ok((x, y))
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let (images, labels) = self.batch(indices)?;
        Ok(Self { images, labels, dims: self.dims })
    }

    /// The first `len - n` samples and the last `n`.
    pub fn split_tail(&self, n: usize) -> Result<(Self, Self)> {
        if n > self.len() {
            return Err(arg_err!("cannot hold out {n} of {} samples", self.len()));
        }
        let cut = self.len() - n;
        let head: Vec<usize> = (0..cut).collect();
        let tail: Vec<usize> = (cut..self.len()).collect();
        Ok((self.subset(&head)?, self.subset(&tail)?))
    }

    /// The first `n` samples (or all of them).
    pub fn truncate(&self, n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }
}
