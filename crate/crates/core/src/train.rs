//! Mini-batch SGD with momentum, evaluation and the seed/dropout study.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{Dataset, ImageDims};
use crate::error::{arg_err, Error, Result};
use crate::maxplus::draw_connection_mask;
use crate::model::{Arch, CnnShape, Model};
use crate::pruning::accuracy;
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// Every knob of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    /// Linear filters `J` of a `maxplus-mlp` head.
    pub units: usize,
    pub dropout_ratio: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_every_steps: usize,
    pub momentum: f64,
    pub arch: Arch,
    /// Half-width of the uniform `wm` initialization.
    pub wm_init: f64,
    pub cnn: CnnShape,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            units: 144,
            dropout_ratio: 0.5,
            epochs: 20,
            batch_size: 64,
            lr0: 0.01,
            decay_factor: 0.5,
            decay_every_steps: 8000,
            momentum: 0.9,
            arch: Arch::MaxPlusMlp,
            wm_init: 0.05,
            cnn: CnnShape::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(arg_err!("invalid {what}"));
        if self.units == 0 {
            return bad("units (must be positive)");
        }
        if !(0.0..1.0).contains(&self.dropout_ratio) {
            return bad("dropout ratio (must lie in [0, 1))");
        }
        if self.batch_size == 0 {
            return bad("batch size (must be positive)");
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return bad("lr0 (must be positive)");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad("decay factor (must lie in (0, 1])");
        }
        if self.decay_every_steps == 0 {
            return bad("decay interval (must be positive)");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum (must lie in [0, 1))");
        }
        if !(self.wm_init.is_finite() && self.wm_init >= 0.0) {
            return bad("wm init (must be non-negative)");
        }
        if let Arch::MaxoutLinear { group: 0 } = self.arch {
            return bad("maxout group (must be positive)");
        }
        Ok(())
    }
}

/// `lr0 · decay_factor ^ floor(step / decay_every_steps)`.
pub fn lr_at(step: usize, cfg: &TrainConfig) -> f64 {
    let k = step / cfg.decay_every_steps.max(1);
    cfg.lr0 * libm::pow(cfg.decay_factor, k as f64)
}

/// Parameters drawn from the run's initialization stream.
pub fn init_model(cfg: &TrainConfig, dims: ImageDims) -> Result<Model> {
    cfg.validate()?;
    let mut rng = SeededRng::derived(cfg.seed, 0);
    Model::init(cfg.arch, dims, cfg.units, &cfg.cnn, cfg.wm_init, &mut rng)
}

/// `v <- momentum · v - lr · g`, `p <- p + v`. Entries of `p` equal to
/// `-inf` are left alone.
pub fn sgd_momentum_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    velocity: &mut [Tensor],
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(arg_err!(
            "{} parameters, {} gradients, {} velocities",
            params.len(),
            grads.len(),
            velocity.len()
        ));
    }
    for (i, ((p, g), v)) in params.iter_mut().zip(grads).zip(velocity.iter_mut()).enumerate() {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(crate::error::dim_err!(
                "parameter {i}: {:?}, gradient {:?}, velocity {:?}",
                p.shape(),
                g.shape(),
                v.shape()
            ));
        }
        if let Some(at) = g.data().iter().position(|x| !x.is_finite()) {
            return Err(Error::NumericFault(format!("gradient of parameter {i} is {} at {at}", g.data()[at])));
        }
        for ((pv, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            if *pv == f64::NEG_INFINITY {
                continue;
            }
            *vv = momentum * *vv - lr * gv;
            *pv += *vv;
            if !pv.is_finite() {
                return Err(Error::NumericFault(format!("parameter {i} diverged")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub step: usize,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Per-epoch records with strictly increasing epochs and steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    records: Vec<EpochRecord>,
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: EpochRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if r.epoch <= last.epoch || r.step <= last.step {
                return Err(arg_err!("epoch/step must increase: {last:?} then {r:?}"));
            }
        }
        self.records.push(r);
        Ok(())
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

/// Trains a fresh model. See [`train_model`].
pub fn train(cfg: &TrainConfig, train_set: &Dataset, val_set: &Dataset) -> Result<(Model, MetricsLog)> {
    train_with_observer(cfg, train_set, val_set, &mut |_| {})
}

pub fn train_with_observer(
    cfg: &TrainConfig,
    train_set: &Dataset,
    val_set: &Dataset,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<(Model, MetricsLog)> {
    let model = init_model(cfg, train_set.dims())?;
    train_model(model, cfg, train_set, val_set, observer)
}

/// Continues training `model` (for example one whose trunk was adopted from
/// another model).
///
/// Each epoch visits the training set in a fresh Fisher-Yates order. When
/// the head is max-plus and the dropout ratio is positive, every mini-batch
/// draws a new connection mask. Validation accuracy is logged after every
/// epoch.
pub fn train_model(
    mut model: Model,
    cfg: &TrainConfig,
    train_set: &Dataset,
    val_set: &Dataset,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<(Model, MetricsLog)> {
    cfg.validate()?;
    if train_set.is_empty() && cfg.epochs > 0 {
        return Err(arg_err!("training set is empty"));
    }
    let mut order_rng = SeededRng::derived(cfg.seed, 1);
    let mut mask_rng = SeededRng::derived(cfg.seed, 2);
    let mut velocity: Vec<Tensor> = model.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
    let outputs = model.maxplus_block().map(|b| (b.units(), b.outputs()));
    let mut log = MetricsLog::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0;
    for epoch in 1..=cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut lr = cfg.lr0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = train_set.batch(chunk)?;
            let mask = match outputs {
                Some((j, k)) if cfg.dropout_ratio > 0.0 => {
                    Some(draw_connection_mask(&mut mask_rng, j, k, cfg.dropout_ratio)?)
                }
                _ => None,
            };
            let (loss, grads) = model.loss_and_grads(&x, &y, mask.as_ref()).map_err(|e| match e {
                Error::Domain(m) => Error::NumericFault(format!("step {step}: {m}")),
                e => e,
            })?;
            if !loss.is_finite() {
                return Err(Error::NumericFault(format!("loss {loss} at step {step}")));
            }
            loss_sum += loss * chunk.len() as f64;
            lr = lr_at(step, cfg);
            sgd_momentum_step(&mut model.params_mut(), &grads, &mut velocity, lr, cfg.momentum)?;
            step += 1;
        }
        let record = EpochRecord {
            epoch,
            step,
            lr,
            train_loss: loss_sum / train_set.len() as f64,
            val_accuracy: evaluate(&model, val_set)?,
        };
        observer(&record);
        log.push(record)?;
    }
    Ok((model, log))
}

/// Predicted class (lowest index on ties) for every sample, in batches.
pub fn predict(model: &Model, data: &Dataset) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(data.len());
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(1000) {
        let (x, _) = data.batch(chunk)?;
        out.extend(crate::tensor::argmax_axis(&model.logits(&x)?, 1)?.into_vec());
    }
    Ok(out)
}

/// Fraction of samples classified correctly. No mask is applied.
pub fn evaluate(model: &Model, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut hits = 0.0;
    for chunk in idx.chunks(1000) {
        let (x, y) = data.batch(chunk)?;
        hits += accuracy(&model.logits(&x)?, &y)? * chunk.len() as f64;
    }
    Ok(libm::round(hits) / data.len() as f64)
}

/// Mean, extremes and population standard deviation of one ratio's runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSummary {
    pub ratio: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
}

/// Final validation accuracy for every `(ratio, seed)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedStudy {
    pub seeds: Vec<u64>,
    pub ratios: Vec<f64>,
    /// `accuracy[r][s]` for `ratios[r]` and `seeds[s]`.
    pub accuracy: Vec<Vec<f64>>,
    pub summary: Vec<RatioSummary>,
}

impl SeedStudy {
    pub fn from_cells(seeds: Vec<u64>, ratios: Vec<f64>, accuracy: Vec<Vec<f64>>) -> Result<Self> {
        if seeds.is_empty() || ratios.is_empty() {
            return Err(arg_err!("seed study needs at least one seed and one ratio"));
        }
        if accuracy.len() != ratios.len() || accuracy.iter().any(|row| row.len() != seeds.len()) {
            return Err(arg_err!("accuracy table does not match the grid"));
        }
        let summary = ratios
            .iter()
            .zip(&accuracy)
            .map(|(&ratio, row)| {
                let n = row.len() as f64;
                let mean = row.iter().sum::<f64>() / n;
                let var = row.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
                RatioSummary {
                    ratio,
                    mean,
                    min: row.iter().copied().fold(f64::INFINITY, f64::min),
                    max: row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    std: libm::sqrt(var),
                }
            })
            .collect();
        Ok(Self { seeds, ratios, accuracy, summary })
    }
}

/// The configuration of one study cell.
pub fn study_cell_config(base: &TrainConfig, seed: u64, ratio: f64) -> TrainConfig {
    TrainConfig { seed, dropout_ratio: ratio, ..base.clone() }
}

/// Trains one model per `(seed, ratio)` pair, one after another.
pub fn seed_study(
    base: &TrainConfig,
    seeds: &[u64],
    ratios: &[f64],
    train_set: &Dataset,
    val_set: &Dataset,
) -> Result<SeedStudy> {
    let mut acc = Vec::with_capacity(ratios.len());
    for &r in ratios {
        let mut row = Vec::with_capacity(seeds.len());
        for &s in seeds {
            let (_, log) = train(&study_cell_config(base, s, r), train_set, val_set)?;
            row.push(log.last().map_or(0.0, |e| e.val_accuracy));
        }
        acc.push(row);
    }
    SeedStudy::from_cells(seeds.to_vec(), ratios.to_vec(), acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_gaussians(n: usize, seed: u64) -> Dataset {
        let mut rng = SeededRng::new(seed);
        let mut px = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % 2;
            // the layers are bias-free, so the classes sit on either side of
            // the diagonal through the origin
            let centre = if c == 0 { [0.75, 0.25] } else { [0.25, 0.75] };
            for m in centre {
                // sum of uniforms: a bounded bell around the centre
                let e: f64 = (0..4).map(|_| rng.uniform(-0.05, 0.05).unwrap()).sum();
                px.push(m + e);
            }
            labels.push(c);
        }
        Dataset::new(Tensor::new(vec![n, 2], px).unwrap(), labels, ImageDims { channels: 1, height: 1, width: 2 })
            .unwrap()
    }

    #[test]
    fn lr_schedule() {
        let cfg = TrainConfig { lr0: 0.05, decay_factor: 0.5, decay_every_steps: 1000, ..Default::default() };
        assert_eq!(lr_at(0, &cfg), 0.05);
        assert_eq!(lr_at(2500, &cfg), 0.0125);
        let flat = TrainConfig { decay_factor: 1.0, ..cfg };
        assert_eq!(lr_at(123_456, &flat), 0.05);
    }

    #[test]
    fn momentum_by_hand() {
        let mut p = Tensor::vector(vec![1.0]).unwrap();
        let g = [Tensor::vector(vec![1.0]).unwrap()];
        let mut v = [Tensor::zeros(&[1])];
        for _ in 0..2 {
            sgd_momentum_step(&mut [&mut p], &g, &mut v, 0.1, 0.9).unwrap();
        }
        assert!((p.data()[0] - 0.71).abs() < 1e-15);
    }

    #[test]
    fn plain_sgd_and_velocity_decay() {
        let mut p = Tensor::vector(vec![2.0, f64::NEG_INFINITY]).unwrap();
        let mut v = [Tensor::zeros(&[2])];
        sgd_momentum_step(&mut [&mut p], &[Tensor::vector(vec![1.0, 1.0]).unwrap()], &mut v, 0.5, 0.0).unwrap();
        assert_eq!(p.data(), &[1.5, f64::NEG_INFINITY]);
        let mut v = [Tensor::vector(vec![1.0, 0.0]).unwrap()];
        let zero = [Tensor::zeros(&[2])];
        for n in 1..=3 {
            sgd_momentum_step(&mut [&mut p], &zero, &mut v, 0.5, 0.5).unwrap();
            assert_eq!(v[0].data()[0], libm::pow(0.5, n as f64));
        }
    }

    #[test]
    fn non_finite_gradient_is_a_fault() {
        let mut p = Tensor::vector(vec![0.0]).unwrap();
        let mut v = [Tensor::zeros(&[1])];
        let g = [Tensor::new(vec![1], vec![f64::NEG_INFINITY]).unwrap()];
        assert!(matches!(
            sgd_momentum_step(&mut [&mut p], &g, &mut v, 0.1, 0.9),
            Err(Error::NumericFault(_))
        ));
    }

    #[test]
    fn metrics_must_increase() {
        let mut log = MetricsLog::new();
        let r = EpochRecord { epoch: 1, step: 10, lr: 0.1, train_loss: 1.0, val_accuracy: 0.5 };
        log.push(r).unwrap();
        assert!(log.push(r).is_err());
        assert!(log.push(EpochRecord { epoch: 2, step: 10, ..r }).is_err());
        log.push(EpochRecord { epoch: 2, step: 20, ..r }).unwrap();
    }

    #[test]
    fn separable_data_is_learned() {
        let data = two_gaussians(200, 3);
        let cfg = TrainConfig {
            arch: Arch::SoftmaxLinear,
            epochs: 30,
            batch_size: 10,
            lr0: 0.5,
            dropout_ratio: 0.0,
            ..Default::default()
        };
        let (model, log) = train(&cfg, &data, &data).unwrap();
        assert_eq!(evaluate(&model, &data).unwrap(), 1.0);
        assert_eq!(log.records().len(), 30);
    }

    #[test]
    fn deterministic_and_ratio_zero_means_off() {
        let data = two_gaussians(60, 4);
        let cfg = TrainConfig { units: 6, epochs: 3, batch_size: 8, dropout_ratio: 0.0, ..Default::default() };
        let (m1, l1) = train(&cfg, &data, &data).unwrap();
        let (m2, l2) = train(&cfg, &data, &data).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(l1, l2);
        let dropped = TrainConfig { dropout_ratio: 0.5, ..cfg };
        let (m3, _) = train(&dropped, &data, &data).unwrap();
        assert_ne!(m1, m3);
    }

    #[test]
    fn zero_epochs_leaves_initial_model() {
        let data = two_gaussians(20, 5);
        let cfg = TrainConfig { units: 4, epochs: 0, ..Default::default() };
        let (m, log) = train(&cfg, &data, &data).unwrap();
        assert!(log.records().is_empty());
        assert_eq!(m, init_model(&cfg, data.dims()).unwrap());
    }

    #[test]
    fn evaluate_matches_loop_oracle() {
        let data = two_gaussians(100, 6);
        let cfg = TrainConfig { units: 5, epochs: 1, batch_size: 16, ..Default::default() };
        let (m, _) = train(&cfg, &data, &data).unwrap();
        let mut hits = 0;
        for i in 0..data.len() {
            let (x, y) = data.batch(&[i]).unwrap();
            let z = m.logits(&x).unwrap();
            let row = z.row(0);
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            hits += (best == y[0]) as usize;
        }
        assert_eq!(evaluate(&m, &data).unwrap(), hits as f64 / 100.0);
    }

    #[test]
    fn study_table_and_summary() {
        let data = two_gaussians(40, 7);
        let base = TrainConfig { units: 4, epochs: 1, batch_size: 8, ..Default::default() };
        let study = seed_study(&base, &[1], &[0.5], &data, &data).unwrap();
        let (_, log) = train(&study_cell_config(&base, 1, 0.5), &data, &data).unwrap();
        assert_eq!(study.accuracy, vec![vec![log.last().unwrap().val_accuracy]]);
        let s = SeedStudy::from_cells(vec![1, 2], vec![0.0], vec![vec![0.5, 0.7]]).unwrap();
        assert!((s.summary[0].mean - 0.6).abs() < 1e-15);
        assert!((s.summary[0].std - 0.1).abs() < 1e-15);
        assert_eq!((s.summary[0].min, s.summary[0].max), (0.5, 0.7));
    }

    #[test]
    fn constant_predictor_on_balanced_data() {
        let n = 100;
        let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
        let data = Dataset::new(Tensor::zeros(&[n, 2]), labels, ImageDims { channels: 1, height: 1, width: 2 }).unwrap();
        let model = Model::SoftmaxLinear { dense: crate::layers::DenseParams::new(Tensor::zeros(&[2, 10])).unwrap() };
        assert_eq!(evaluate(&model, &data).unwrap(), 0.1);
    }
}
