use alloc::vec::Vec;

use crate::error::{dim_err, Result};
use crate::tensor::Tensor;

/// Flat input offsets of each pooled maximum, recorded by [`maxpool2x2`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl PoolIndices {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

fn dims4(x: &Tensor) -> Result<[usize; 4]> {
    match x.shape()[..] {
        [b, c, h, w] => Ok([b, c, h, w]),
        _ => Err(dim_err!("expected B x C x H x W, got {:?}", x.shape())),
    }
}

/// Non-overlapping 2x2 max pooling. Ties go to the lowest flat index
/// (top-left, top-right, bottom-left, bottom-right).
pub fn maxpool2x2(x: &Tensor) -> Result<(Tensor, PoolIndices)> {
    let [b, c, h, w] = dims4(x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(dim_err!("maxpool2x2 needs even spatial dims, got {h}x{w}"));
    }
    let (oh, ow) = (h / 2, w / 2);
    let data = x.data();
    let mut out = Vec::with_capacity(b * c * oh * ow);
    let mut argmax = Vec::with_capacity(b * c * oh * ow);
    for plane in 0..b * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let top = base + 2 * oy * w + 2 * ox;
                let cells = [top, top + 1, top + w, top + w + 1];
                let mut best = cells[0];
                for &cell in &cells[1..] {
                    if data[cell] > data[best] {
                        best = cell;
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::from_raw(alloc::vec![b, c, oh, ow], out),
        PoolIndices { input_shape: x.shape().to_vec(), argmax },
    ))
}

/// Routes each output gradient to the input cell that won its window.
pub fn maxpool2x2_backward(grad: &Tensor, indices: &PoolIndices) -> Result<Tensor> {
    if grad.len() != indices.argmax.len() {
        return Err(dim_err!(
            "pool backward: {} gradients for {} windows",
            grad.len(),
            indices.argmax.len()
        ));
    }
    let mut out = Tensor::zeros(&indices.input_shape);
    let data = out.data_mut();
    for (&cell, &g) in indices.argmax.iter().zip(grad.data()) {
        data[cell] += g;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_window() {
        let x = Tensor::new(alloc::vec![1, 1, 2, 2], alloc::vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, idx) = maxpool2x2(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(idx.argmax(), &[3]);
    }

    #[test]
    fn constant_image_routes_to_first_cell() {
        let x = Tensor::filled(&[1, 1, 4, 4], 2.5).unwrap();
        let (y, idx) = maxpool2x2(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 2.5));
        assert_eq!(idx.argmax(), &[0, 2, 8, 10]);
        let g = maxpool2x2_backward(&Tensor::filled(&[1, 1, 2, 2], 1.0).unwrap(), &idx).unwrap();
        let expected: alloc::vec::Vec<f64> =
            (0..16).map(|i| if [0, 2, 8, 10].contains(&i) { 1.0 } else { 0.0 }).collect();
        assert_eq!(g.data(), &expected[..]);
    }

    #[test]
    fn odd_dims_rejected() {
        assert!(maxpool2x2(&Tensor::zeros(&[1, 1, 3, 4])).is_err());
        assert!(maxpool2x2(&Tensor::zeros(&[1, 4, 4])).is_err());
    }
}
