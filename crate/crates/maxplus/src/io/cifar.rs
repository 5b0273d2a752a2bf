use std::path::Path;

use maxplus_core::{Dataset, ImageDims, Tensor};

use super::{read_file, IoError, IoResult};

/// One label byte and 3 x 32 x 32 channel-major pixels.
pub const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;

/// Parses concatenated CIFAR-10 binary records.
pub fn parse_cifar10(bytes: &[u8]) -> IoResult<Dataset> {
    if bytes.len() % CIFAR_RECORD != 0 {
        return Err(IoError::Length(format!(
            "{} bytes is not a whole number of {CIFAR_RECORD}-byte records",
            bytes.len()
        )));
    }
    let n = bytes.len() / CIFAR_RECORD;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n * (CIFAR_RECORD - 1));
    for (i, rec) in bytes.chunks_exact(CIFAR_RECORD).enumerate() {
        if rec[0] >= 10 {
            return Err(IoError::Format(format!("record {i}: label {} is not a CIFAR-10 class", rec[0])));
        }
        labels.push(usize::from(rec[0]));
        pixels.extend(rec[1..].iter().map(|&p| f64::from(p) / 255.0));
    }
    let images = Tensor::new(vec![n, CIFAR_RECORD - 1], pixels)?;
    Ok(Dataset::new(images, labels, ImageDims::CIFAR10)?)
}

/// Loads and concatenates batch files in the given order.
pub fn load_cifar10(batch_paths: &[&Path]) -> IoResult<Dataset> {
    let mut bytes = Vec::new();
    for p in batch_paths {
        let b = read_file(p)?;
        if b.len() % CIFAR_RECORD != 0 {
            return Err(IoError::Length(format!("{}: {} bytes is not a whole number of records", p.display(), b.len())));
        }
        bytes.extend(b);
    }
    parse_cifar10(&bytes)
}
