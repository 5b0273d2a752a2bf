use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::MaxPlusBlock;
use crate::error::Result;
use crate::tensor::{argmax_axis, Tensor};

/// The filter each output unit leans on most: `argmax_j wm[j, k]` and the
/// matching column of `wf`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSelection {
    /// Selected filter index per output unit.
    pub indices: Vec<usize>,
    /// One row per output unit holding the selected `wf` column (`K x I`).
    pub filters: Tensor,
}

/// Output units that select the same linear filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collision {
    pub filter: usize,
    pub classes: Vec<usize>,
}

pub fn select_filters(block: &MaxPlusBlock) -> Result<FilterSelection> {
    let indices = argmax_axis(block.wm(), 0)?.into_vec();
    let filters = block.wf().select_columns(&indices)?.transpose2()?;
    Ok(FilterSelection { indices, filters })
}

/// Groups output units by their selected filter and keeps the groups with
/// two or more members, ordered by filter index.
pub fn detect_collisions(block: &MaxPlusBlock) -> Result<Vec<Collision>> {
    let indices = argmax_axis(block.wm(), 0)?.into_vec();
    let mut by_filter: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (class, &j) in indices.iter().enumerate() {
        by_filter.entry(j).or_default().push(class);
    }
    Ok(by_filter
        .into_iter()
        .filter(|(_, classes)| classes.len() > 1)
        .map(|(filter, classes)| Collision { filter, classes })
        .collect())
}
