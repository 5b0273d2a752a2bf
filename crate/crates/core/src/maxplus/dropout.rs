use alloc::vec;
use alloc::vec::Vec;

use crate::error::{arg_err, Result};
use crate::rng::SeededRng;

/// Per-connection mask between `J` linear filters and `K` max-plus outputs.
///
/// A dropped connection is left out of the max entirely (it contributes
/// `-inf`), and nothing is rescaled. Every column keeps at least one active
/// connection.
#[derive(Debug, Clone, PartialEq)]
pub struct DropMask {
    active: Vec<bool>,
    units: usize,
    outputs: usize,
    ratio: f64,
}

impl DropMask {
    pub fn all_active(units: usize, outputs: usize) -> Self {
        Self { active: vec![true; units * outputs], units, outputs, ratio: 0.0 }
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    #[inline]
    pub fn is_active(&self, j: usize, k: usize) -> bool {
        self.active[j * self.outputs + k]
    }

    /// Fraction of active connections in column `k`.
    pub fn active_fraction(&self, k: usize) -> f64 {
        let n = (0..self.units).filter(|&j| self.is_active(j, k)).count();
        n as f64 / self.units as f64
    }
}

/// Draws an independent Bernoulli(`1 - ratio`) keep decision per connection,
/// in row-major `(j, k)` order. A column that lost every connection gets one
/// uniformly chosen connection back.
pub fn draw_connection_mask(rng: &mut SeededRng, units: usize, outputs: usize, ratio: f64) -> Result<DropMask> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(arg_err!("dropout ratio must lie in [0, 1), got {ratio}"));
    }
    if units == 0 || outputs == 0 {
        return Err(arg_err!("mask needs at least one unit and one output"));
    }
    let mut active = Vec::with_capacity(units * outputs);
    for _ in 0..units * outputs {
        active.push(!rng.bernoulli(ratio));
    }
    for k in 0..outputs {
        if (0..units).all(|j| !active[j * outputs + k]) {
            let j = rng.below(units);
            active[j * outputs + k] = true;
        }
    }
    Ok(DropMask { active, units, outputs, ratio })
}
