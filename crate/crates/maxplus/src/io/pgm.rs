use std::path::Path;

use maxplus_core::error::Error;
use maxplus_core::Tensor;

use super::{write_file, IoResult};

/// Binary `P5` bytes with the finite range mapped onto `[0, 255]`.
///
/// A constant image becomes all 128. `-inf` entries map to 0.
pub fn pgm_bytes(image: &Tensor) -> IoResult<Vec<u8>> {
    let (h, w) = image.dims2()?;
    let finite = image.data().iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|&v| {
        if !v.is_finite() {
            0
        } else if hi == lo {
            128
        } else {
            ((v - lo) / (hi - lo) * 255.0).round() as u8
        }
    }));
    Ok(out)
}

pub fn export_pgm(image: &Tensor, path: &Path) -> IoResult<()> {
    write_file(path, &pgm_bytes(image)?)
}

/// Reshapes `values` into the smallest square, padding with `fill`.
/// Returns the image and whether padding was needed.
pub fn square_image(values: &[f64], fill: f64) -> IoResult<(Tensor, bool)> {
    if values.is_empty() {
        return Err(Error::Dimension("cannot draw an empty vector".into()).into());
    }
    let side = (1..).find(|s| s * s >= values.len()).unwrap();
    let mut data = values.to_vec();
    let padded = data.len() < side * side;
    data.resize(side * side, fill);
    Ok((Tensor::new(vec![side, side], data)?, padded))
}

/// One `wm` column as a square image (`144` weights become `12 x 12`),
/// padded with the column minimum when `J` is not a perfect square.
pub fn wm_column_image(column: &[f64]) -> IoResult<(Tensor, bool)> {
    let min = column.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    square_image(column, if min.is_finite() { min } else { 0.0 })
}
