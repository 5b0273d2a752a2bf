use alloc::vec::Vec;

use crate::error::{arg_err, dim_err, Result};
use crate::tensor::Tensor;

/// Row-wise softmax of a `B x K` matrix.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let (b, k) = logits.dims2()?;
    let mut out = Vec::with_capacity(b * k);
    for r in 0..b {
        let row = logits.row(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        out.extend(row.iter().map(|&v| libm::exp(v - m)));
        let s: f64 = out[start..].iter().sum();
        for v in &mut out[start..] {
            *v /= s;
        }
    }
    Tensor::from_arithmetic(alloc::vec![b, k], out)
}

/// Mean softmax cross-entropy and its gradient `(softmax - onehot) / B`.
pub fn softmax_xent(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (b, k) = logits.dims2()?;
    if labels.len() != b {
        return Err(dim_err!("{} labels for {b} rows", labels.len()));
    }
    if !logits.is_finite() {
        return Err(crate::Error::Domain("logits contain -inf".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(arg_err!("label {bad} out of range for {k} classes"));
    }
    let mut grad = Vec::with_capacity(b * k);
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = row.iter().map(|&v| libm::exp(v - m)).sum();
        let lse = m + libm::log(s);
        loss += lse - row[label];
        for (c, &v) in row.iter().enumerate() {
            let p = libm::exp(v - lse);
            let t = if c == label { 1.0 } else { 0.0 };
            grad.push((p - t) / b as f64);
        }
    }
    Ok((loss / b as f64, Tensor::from_arithmetic(alloc::vec![b, k], grad)?))
}
