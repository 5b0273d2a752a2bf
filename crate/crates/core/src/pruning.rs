//! Threshold pruning of max-plus blocks.
//!
//! For each output `k` only the connections whose weight clears
//!
//! ```text
//! t_k = s · max_j wm[j, k] + (1 - s) · min_j wm[j, k]
//! ```
//!
//! are kept (inclusively, so `s = 1` keeps the argmax and `s = 0` keeps
//! everything). The union of surviving filters becomes a smaller linear map,
//! and each output takes a max over its own, possibly uneven, group of those
//! filters plus the stored offsets.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{arg_err, dim_err, Error, Result};
use crate::maxplus::{maxplus_forward, MaxPlusBlock};
use crate::model::Model;
use crate::tensor::{argmax_axis, matmul, Tensor};

/// Smallest weight kept for a column at threshold `s`.
///
/// Written as `min + s · (max - min)` and clamped to `max`, which equals the
/// two-term form in exact arithmetic and stays monotone in `s` and bounded
/// by the column maximum under rounding.
pub fn column_threshold(column: &[f64], s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(arg_err!("threshold s must lie in [0, 1], got {s}"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in column.iter().filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == f64::NEG_INFINITY {
        return Err(Error::DegenerateSlice("column has no finite entry".into()));
    }
    if s == 1.0 {
        return Ok(hi);
    }
    Ok((lo + s * (hi - lo)).min(hi))
}

/// Indices `j` (ascending) with finite `column[j] >= threshold(s)`.
pub fn retained_set(column: &[f64], s: f64) -> Result<Vec<usize>> {
    let t = column_threshold(column, s)?;
    Ok(column
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite() && **v >= t)
        .map(|(j, _)| j)
        .collect())
}

/// One member of an output's group: a retained filter and its offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupEntry {
    /// Column of [`PrunedHead::retained_filters`].
    pub filter: usize,
    pub offset: f64,
}

/// A linear map onto the retained filters followed by a max over uneven
/// per-output groups.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedHead {
    retained_filters: Tensor,
    source: Vec<usize>,
    groups: Vec<Vec<GroupEntry>>,
}

impl PrunedHead {
    /// `source[r]` is the original filter index of retained column `r`.
    pub fn new(retained_filters: Tensor, source: Vec<usize>, groups: Vec<Vec<GroupEntry>>) -> Result<Self> {
        let (_, jr) = retained_filters.dims2()?;
        if source.len() != jr {
            return Err(dim_err!("{jr} retained filters but {} source indices", source.len()));
        }
        if !retained_filters.is_finite() {
            return Err(Error::Domain("retained filters must be finite".into()));
        }
        if groups.is_empty() {
            return Err(arg_err!("pruned head needs at least one output"));
        }
        let mut used = vec![false; jr];
        for (k, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::DegenerateColumn { column: k });
            }
            for e in g {
                if e.filter >= jr {
                    return Err(dim_err!("group {k} references filter {} of {jr}", e.filter));
                }
                if !e.offset.is_finite() {
                    return Err(Error::Domain(format!("group {k} has a non-finite offset")));
                }
                used[e.filter] = true;
            }
        }
        if let Some(r) = used.iter().position(|u| !u) {
            return Err(arg_err!("retained filter {r} belongs to no group"));
        }
        Ok(Self { retained_filters, source, groups })
    }

    /// `I x J_r`.
    pub fn retained_filters(&self) -> &Tensor {
        &self.retained_filters
    }

    pub fn source(&self) -> &[usize] {
        &self.source
    }

    pub fn groups(&self) -> &[Vec<GroupEntry>] {
        &self.groups
    }

    pub fn inputs(&self) -> usize {
        self.retained_filters.shape()[0]
    }

    /// `J_r`, the number of distinct retained filters.
    pub fn retained(&self) -> usize {
        self.source.len()
    }

    pub fn outputs(&self) -> usize {
        self.groups.len()
    }

    /// Group size per output.
    pub fn partition(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Connections kept over all outputs (at least `J_r`).
    pub fn group_total(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Winner per `(sample, output)` as an original filter index, plus the
    /// outputs.
    fn forward_with_winners(&self, x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
        let yr = matmul(x, &self.retained_filters)?;
        let b = yr.shape()[0];
        let k = self.groups.len();
        let mut z = Vec::with_capacity(b * k);
        let mut win = Vec::with_capacity(b * k);
        for r in 0..b {
            let row = yr.row(r);
            for g in &self.groups {
                let mut best = g[0];
                let mut best_v = row[best.filter] + best.offset;
                for e in &g[1..] {
                    let v = row[e.filter] + e.offset;
                    if v > best_v {
                        best = *e;
                        best_v = v;
                    }
                }
                z.push(best_v);
                win.push(self.source[best.filter]);
            }
        }
        Ok((Tensor::new(vec![b, k], z)?, win))
    }
}

/// `y_r = x · retained_filters`, `z[b, k] = max over groups[k] of
/// (y_r[b, r] + offset)`.
pub fn pruned_forward(x: &Tensor, head: &PrunedHead) -> Result<Tensor> {
    Ok(head.forward_with_winners(x)?.0)
}

/// Summary of one pruning pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub threshold: f64,
    /// Retained connections per output.
    pub partition: Vec<usize>,
    /// Distinct retained filters.
    pub retained: usize,
    /// Filters in the unpruned block.
    pub units: usize,
    pub val_accuracy_before: Option<f64>,
    pub val_accuracy_after: Option<f64>,
    pub test_accuracy_before: Option<f64>,
    pub test_accuracy_after: Option<f64>,
    /// Fraction of evaluated samples whose outputs are bitwise unchanged.
    pub exact_agreement: Option<f64>,
}

/// Keeps, for every output independently, the connections that clear the
/// threshold, and collects the union of their filters once each.
pub fn prune_block(block: &MaxPlusBlock, s: f64) -> Result<(PrunedHead, PruneReport)> {
    let (units, outputs) = block.wm().dims2()?;
    let mut per_class = Vec::with_capacity(outputs);
    for k in 0..outputs {
        per_class.push(retained_set(&block.wm().column(k)?, s)?);
    }
    let mut dedup: BTreeMap<usize, usize> = BTreeMap::new();
    for set in &per_class {
        for &j in set {
            dedup.insert(j, 0);
        }
    }
    let source: Vec<usize> = dedup.keys().copied().collect();
    for (r, j) in source.iter().enumerate() {
        dedup.insert(*j, r);
    }
    let groups = per_class
        .iter()
        .enumerate()
        .map(|(k, set)| {
            set.iter()
                .map(|&j| GroupEntry { filter: dedup[&j], offset: block.wm().data()[j * outputs + k] })
                .collect()
        })
        .collect();
    let head = PrunedHead::new(block.wf().select_columns(&source)?, source, groups)?;
    let report = PruneReport {
        threshold: s,
        partition: head.partition(),
        retained: head.retained(),
        units,
        val_accuracy_before: None,
        val_accuracy_after: None,
        test_accuracy_before: None,
        test_accuracy_after: None,
        exact_agreement: None,
    };
    Ok((head, report))
}

/// Pruned versus unpruned outputs over a set of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Equivalence {
    pub samples: usize,
    /// Samples whose outputs are bitwise identical.
    pub exact: usize,
    pub max_abs_diff: f64,
    /// Samples whose predicted class is unchanged.
    pub decisions_agree: usize,
    /// Samples where every output's unpruned winner was retained.
    pub covered: usize,
    /// Covered samples whose outputs nevertheless changed.
    pub guarantee_violations: usize,
    /// Samples with some pruned output above the unpruned one.
    pub dominance_violations: usize,
}

impl Equivalence {
    pub fn exact_fraction(&self) -> f64 {
        self.exact as f64 / self.samples.max(1) as f64
    }

    pub fn decision_agreement(&self) -> f64 {
        self.decisions_agree as f64 / self.samples.max(1) as f64
    }
}

/// Runs both forms on `x` (`B x I`) and compares them sample by sample.
pub fn equivalence_check(block: &MaxPlusBlock, head: &PrunedHead, x: &Tensor) -> Result<Equivalence> {
    if head.inputs() != block.inputs() || head.outputs() != block.outputs() {
        return Err(dim_err!("head does not match block"));
    }
    let (z, winners) = maxplus_forward(&block.features(x)?, block.wm(), None)?;
    let (zp, _) = head.forward_with_winners(x)?;
    let k = block.outputs();
    let kept: Vec<Vec<usize>> = head
        .groups
        .iter()
        .map(|g| g.iter().map(|e| head.source[e.filter]).collect())
        .collect();
    let d = argmax_axis(&z, 1)?;
    let dp = argmax_axis(&zp, 1)?;
    let mut eq = Equivalence {
        samples: z.shape()[0],
        exact: 0,
        max_abs_diff: 0.0,
        decisions_agree: 0,
        covered: 0,
        guarantee_violations: 0,
        dominance_violations: 0,
    };
    for b in 0..eq.samples {
        let (row, rowp) = (z.row(b), zp.row(b));
        let same = row.iter().zip(rowp).all(|(u, v)| u.to_bits() == v.to_bits());
        let covered = (0..k).all(|c| kept[c].contains(&winners.get(b, c)));
        for (u, v) in row.iter().zip(rowp) {
            eq.max_abs_diff = eq.max_abs_diff.max((u - v).abs());
        }
        eq.exact += same as usize;
        eq.covered += covered as usize;
        eq.guarantee_violations += (covered && !same) as usize;
        eq.dominance_violations += row.iter().zip(rowp).any(|(u, v)| v > u) as usize;
        eq.decisions_agree += (d.data()[b] == dp.data()[b]) as usize;
    }
    Ok(eq)
}

/// Head inputs and labels to score a sweep on.
#[derive(Debug, Clone, Copy)]
pub struct EvalSet<'a> {
    pub name: &'a str,
    pub inputs: &'a Tensor,
    pub labels: &'a [usize],
}

/// One threshold of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    pub retained: usize,
    pub group_total: usize,
    pub partition: Vec<usize>,
    /// One accuracy per evaluation set, in the order given.
    pub accuracy: Vec<f64>,
}

/// Accuracy of reference models on the same evaluation sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub name: String,
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub sets: Vec<String>,
    /// Sorted by retained filter count, then by threshold.
    pub rows: Vec<SweepRow>,
    /// The unpruned block, `J_r = J`.
    pub unpruned: SweepRow,
    pub baselines: Vec<Baseline>,
}

impl SweepTable {
    pub fn add_baseline(&mut self, name: &str, accuracy: Vec<f64>) -> Result<()> {
        if accuracy.len() != self.sets.len() {
            return Err(dim_err!("baseline has {} accuracies for {} sets", accuracy.len(), self.sets.len()));
        }
        self.baselines.push(Baseline { name: name.into(), accuracy });
        Ok(())
    }
}

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
pub fn accuracy(z: &Tensor, labels: &[usize]) -> Result<f64> {
    let pred = argmax_axis(z, 1)?;
    if pred.data().len() != labels.len() {
        return Err(dim_err!("{} predictions for {} labels", pred.data().len(), labels.len()));
    }
    let hits = pred.data().iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len().max(1) as f64)
}

/// Prunes at every threshold in `grid` and scores each head on `sets`.
pub fn sweep(block: &MaxPlusBlock, sets: &[EvalSet<'_>], grid: &[f64]) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(arg_err!("sweep grid is empty"));
    }
    let unpruned = SweepRow {
        threshold: f64::NAN,
        retained: block.units(),
        group_total: block.units() * block.outputs(),
        partition: vec![block.units(); block.outputs()],
        accuracy: sets
            .iter()
            .map(|e| accuracy(&block.forward(e.inputs)?, e.labels))
            .collect::<Result<_>>()?,
    };
    let mut rows = Vec::with_capacity(grid.len());
    for &s in grid {
        let (head, report) = prune_block(block, s)?;
        let acc = sets
            .iter()
            .map(|e| accuracy(&pruned_forward(e.inputs, &head)?, e.labels))
            .collect::<Result<_>>()?;
        rows.push(SweepRow {
            threshold: s,
            retained: report.retained,
            group_total: head.group_total(),
            partition: report.partition,
            accuracy: acc,
        });
    }
    rows.sort_by(|a, b| a.retained.cmp(&b.retained).then(a.threshold.total_cmp(&b.threshold)));
    Ok(SweepTable {
        sets: sets.iter().map(|e| String::from(e.name)).collect(),
        rows,
        unpruned,
        baselines: Vec::new(),
    })
}

/// Parameter savings of pruning the max-plus head of a CNN.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnReduction {
    pub retained: usize,
    pub units: usize,
    /// `1 - J_r / J` for the second-to-last dense layer.
    pub reduction: f64,
    pub report: PruneReport,
}

/// Replaces the max-plus head of a `cnn-maxplus` model by its pruned head.
pub fn prune_cnn_head(model: &Model, s: f64) -> Result<(Model, CnnReduction)> {
    let Model::CnnMaxPlus { trunk, block } = model else {
        return Err(arg_err!("prune_cnn_head needs a cnn-maxplus model, got {}", model.arch()));
    };
    let (head, report) = prune_block(block, s)?;
    let units = block.units();
    let stats = CnnReduction {
        retained: head.retained(),
        units,
        reduction: 1.0 - head.retained() as f64 / units as f64,
        report,
    };
    Ok((Model::Pruned { trunk: Some(trunk.clone()), head }, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::tensor::seeded_uniform;

    fn random_block(rng: &mut SeededRng, i: usize, j: usize, k: usize) -> MaxPlusBlock {
        let wf = seeded_uniform(rng, &[i, j], -1.0, 1.0).unwrap();
        let wm = seeded_uniform(rng, &[j, k], -1.0, 1.0).unwrap();
        MaxPlusBlock::new(wf, wm).unwrap()
    }

    /// Unpruned forward with every non-retained connection set to `-inf`.
    fn masked_oracle(block: &MaxPlusBlock, s: f64, x: &Tensor) -> Tensor {
        let mut masked = block.clone();
        for k in 0..block.outputs() {
            let keep = retained_set(&block.wm().column(k).unwrap(), s).unwrap();
            for j in 0..block.units() {
                if !keep.contains(&j) {
                    masked.set_wm(j, k, f64::NEG_INFINITY).unwrap();
                }
            }
        }
        masked.forward(x).unwrap()
    }

    #[test]
    fn retained_set_examples() {
        let col = [0.9, 0.1, 0.5];
        assert_eq!(retained_set(&col, 1.0).unwrap(), vec![0]);
        assert_eq!(retained_set(&col, 0.5).unwrap(), vec![0, 2]);
        assert_eq!(retained_set(&col, 0.0).unwrap(), vec![0, 1, 2]);
        assert!(retained_set(&col, 1.5).is_err());
        assert!(retained_set(&col, -0.1).is_err());
    }

    #[test]
    fn retained_set_ignores_neg_inf() {
        let col = [f64::NEG_INFINITY, 0.2, 0.4];
        assert_eq!(retained_set(&col, 0.0).unwrap(), vec![1, 2]);
        assert!(retained_set(&[f64::NEG_INFINITY], 0.5).is_err());
    }

    #[test]
    fn argmax_only_without_collisions() {
        let mut wm = Tensor::zeros(&[12, 10]);
        for k in 0..10 {
            wm.set(&[k, k], 1.0).unwrap();
        }
        let block = MaxPlusBlock::new(Tensor::zeros(&[4, 12]), wm).unwrap();
        let (head, report) = prune_block(&block, 1.0).unwrap();
        assert_eq!(report.retained, 10);
        assert_eq!(report.partition, vec![1; 10]);
        assert_eq!(head.source(), &(0..10).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn collision_shares_a_filter() {
        let mut wm = Tensor::zeros(&[12, 10]);
        for k in 0..10 {
            wm.set(&[k, k], 1.0).unwrap();
        }
        wm.set(&[8, 8], 0.0).unwrap();
        wm.set(&[3, 8], 1.0).unwrap();
        let block = MaxPlusBlock::new(Tensor::zeros(&[4, 12]), wm).unwrap();
        let (head, report) = prune_block(&block, 1.0).unwrap();
        assert_eq!(report.retained, 9);
        assert_eq!(head.groups()[3][0].filter, head.groups()[8][0].filter);
        assert_eq!(head.group_total(), 10);
    }

    #[test]
    fn zero_threshold_is_exact() {
        let mut rng = SeededRng::new(5);
        let block = random_block(&mut rng, 6, 9, 4);
        let x = seeded_uniform(&mut rng, &[50, 6], -1.0, 1.0).unwrap();
        let (head, _) = prune_block(&block, 0.0).unwrap();
        assert_eq!(pruned_forward(&x, &head).unwrap(), block.forward(&x).unwrap());
        let eq = equivalence_check(&block, &head, &x).unwrap();
        assert_eq!(eq.exact, 50);
        assert_eq!(eq.max_abs_diff, 0.0);
    }

    #[test]
    fn matches_masked_oracle() {
        let mut rng = SeededRng::new(6);
        let block = random_block(&mut rng, 5, 16, 4);
        let x = seeded_uniform(&mut rng, &[100, 5], -1.0, 1.0).unwrap();
        for &s in &[0.3, 0.7, 1.0] {
            let (head, _) = prune_block(&block, s).unwrap();
            assert_eq!(pruned_forward(&x, &head).unwrap(), masked_oracle(&block, s, &x));
        }
    }

    #[test]
    fn counterexample_is_flagged() {
        // filter 1 has the smaller offset but wins whenever x > 1
        let wf = Tensor::from_rows(&[[0.0, 1.0]]).unwrap();
        let wm = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let block = MaxPlusBlock::new(wf, wm).unwrap();
        let (head, _) = prune_block(&block, 1.0).unwrap();
        let x = Tensor::from_rows(&[[0.5], [3.0]]).unwrap();
        let eq = equivalence_check(&block, &head, &x).unwrap();
        assert_eq!(eq.exact, 1);
        assert_eq!(eq.covered, 1);
        assert_eq!(eq.guarantee_violations, 0);
        assert_eq!(eq.max_abs_diff, 2.0);
        assert_eq!(eq.dominance_violations, 0);
    }

    #[test]
    fn sweep_rows_sorted_and_reference() {
        let mut rng = SeededRng::new(7);
        let block = random_block(&mut rng, 4, 20, 3);
        let x = seeded_uniform(&mut rng, &[30, 4], -1.0, 1.0).unwrap();
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let set = EvalSet { name: "val", inputs: &x, labels: &labels };
        let table = sweep(&block, &[set], &[1.0, 0.0, 0.5]).unwrap();
        let js: Vec<usize> = table.rows.iter().map(|r| r.retained).collect();
        assert!(js.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(table.rows.last().unwrap().retained, 20);
        assert_eq!(table.rows.last().unwrap().accuracy, table.unpruned.accuracy);
        assert!(sweep(&block, &[set], &[]).is_err());
    }
}
