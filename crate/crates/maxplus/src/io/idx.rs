use std::path::Path;

use maxplus_core::{Dataset, ImageDims, Tensor};

use super::{read_file, IoError, IoResult};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, what: &str) -> IoResult<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| IoError::Length(format!("{what}: header truncated at byte {}", bytes.len())))
}

fn payload<'a>(bytes: &'a [u8], header: usize, expected: usize, what: &str) -> IoResult<&'a [u8]> {
    let got = bytes.len() - header;
    if got != expected {
        return Err(IoError::Length(format!("{what}: payload has {got} bytes, header implies {expected}")));
    }
    Ok(&bytes[header..])
}

/// Image count, rows, columns and raw pixels of an IDX image file.
pub fn parse_idx_images(bytes: &[u8]) -> IoResult<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(IoError::Format(format!("images: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4, "images")? as usize;
    let rows = be_u32(bytes, 8, "images")? as usize;
    let cols = be_u32(bytes, 12, "images")? as usize;
    let size = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| IoError::Format("images: dimensions overflow".into()))?;
    Ok((n, rows, cols, payload(bytes, 16, size, "images")?))
}

/// Labels of an IDX label file.
pub fn parse_idx_labels(bytes: &[u8]) -> IoResult<&[u8]> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(IoError::Format(format!("labels: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4, "labels")? as usize;
    payload(bytes, 8, n, "labels")
}

/// Builds a dataset from the bytes of an IDX image file and its label file.
/// Pixels are divided by 255.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> IoResult<Dataset> {
    let (n, rows, cols, pixels) = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if labels.len() != n {
        return Err(IoError::Consistency(format!("{n} images but {} labels", labels.len())));
    }
    if let Some(pos) = labels.iter().position(|&l| l >= 10) {
        return Err(IoError::Format(format!("label {} at index {pos} is not a digit", labels[pos])));
    }
    let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let images = Tensor::new(vec![n, rows * cols], data)?;
    let dims = ImageDims { channels: 1, height: rows, width: cols };
    Ok(Dataset::new(images, labels.iter().map(|&l| usize::from(l)).collect(), dims)?)
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> IoResult<Dataset> {
    parse_idx(&read_file(images_path)?, &read_file(labels_path)?)
}
