#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub fn idx_images(n: usize, rows: usize, cols: usize, pixel: impl Fn(usize, usize) -> u8) -> Vec<u8> {
    let mut b = Vec::new();
    for v in [0x0803u32, n as u32, rows as u32, cols as u32] {
        b.extend(v.to_be_bytes());
    }
    for i in 0..n {
        b.extend((0..rows * cols).map(|p| pixel(i, p)));
    }
    b
}

pub fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend(0x0801u32.to_be_bytes());
    b.extend((labels.len() as u32).to_be_bytes());
    b.extend(labels);
    b
}

/// A learnable 8x8 set: class `c` lights up pixel row `c % 8` (the column
/// parity separates classes 8 and 9 from 0 and 1).
pub fn stripe_images(n: usize) -> (Vec<u8>, Vec<u8>) {
    let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
    let images = idx_images(n, 8, 8, |i, p| {
        let c = i % 10;
        let (r, col) = (p / 8, p % 8);
        let on = r == c % 8 && (c < 8 || col % 2 == 1);
        if on { 250 } else { ((i * 7 + p * 13) % 20) as u8 }
    });
    (images, labels)
}

pub fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, bytes).unwrap();
    p
}

/// Writes the four IDX files a CLI run expects and returns the directory.
pub fn stripe_dataset(dir: &Path, train: usize, test: usize) -> PathBuf {
    let (ti, tl) = stripe_images(train);
    let (vi, vl) = stripe_images(test);
    write(dir, "train-images-idx3-ubyte", &ti);
    write(dir, "train-labels-idx1-ubyte", &idx_labels(&tl));
    write(dir, "t10k-images-idx3-ubyte", &vi);
    write(dir, "t10k-labels-idx1-ubyte", &idx_labels(&vl));
    dir.to_path_buf()
}

pub fn cifar_record(label: u8, fill: u8) -> Vec<u8> {
    let mut r = vec![label];
    r.extend(std::iter::repeat_n(fill, 3 * 32 * 32));
    r
}
