//! Central finite-difference checks of every backward pass.
//!
//! Each suite draws small random instances, forms a scalar by projecting the
//! layer output onto a random tensor `r` (`L = Σ r ⊙ out`), and compares the
//! analytic gradient of `L` with respect to every input and parameter
//! against `(L(θ + ε) - L(θ - ε)) / 2ε`, coordinate by coordinate.
//!
//! Max-type layers are only piecewise linear. Instances whose max has a
//! runner-up within [`TIE_MARGIN`] of the winner (or whose ReLU input is
//! that close to zero) are redrawn and counted as skipped. Whole-model
//! suites cannot cheaply inspect every max, so they drop coordinates whose
//! differences at `ε` and `ε / 2` disagree, which only happens across a kink.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::ImageDims;
use crate::error::{arg_err, Result};
use crate::layers::{
    conv2d, conv2d_backward, dense, dense_backward, maxpool2x2, maxpool2x2_backward, relu, relu_backward,
    softmax_xent, ConvParams, DenseParams,
};
use crate::maxplus::{maxout_backward, maxout_head, maxplus_backward, maxplus_forward, MaxPlusBlock};
use crate::model::{Arch, CnnShape, Model};
use crate::rng::SeededRng;
use crate::tensor::{matmul, matmul_nt, matmul_tn, seeded_uniform, Tensor};

pub const EPSILON: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-5;
pub const TIE_MARGIN: f64 = 1e-3;
const MAX_REDRAWS: usize = 10_000;

/// `||a - n||₂ / max(||a||₂, ||n||₂, 1e-12)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| libm::sqrt(v.map(|x| x * x).sum::<f64>());
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied())).max(1e-12);
    diff / scale
}

/// Central differences of `f` with respect to every entry of `points`.
pub fn central_difference(
    f: &mut dyn FnMut(&[Tensor]) -> Result<f64>,
    points: &[Tensor],
    eps: f64,
) -> Result<Vec<Tensor>> {
    let mut work = points.to_vec();
    let mut out = Vec::with_capacity(points.len());
    for t in 0..points.len() {
        let mut g = vec![0.0; points[t].len()];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = points[t].data()[i];
            work[t].data_mut()[i] = orig + eps;
            let hi = f(&work)?;
            work[t].data_mut()[i] = orig - eps;
            let lo = f(&work)?;
            work[t].data_mut()[i] = orig;
            *gi = (hi - lo) / (2.0 * eps);
        }
        out.push(Tensor::new(points[t].shape().to_vec(), g)?);
    }
    Ok(out)
}

fn flatten(ts: &[Tensor]) -> Vec<f64> {
    ts.iter().flat_map(|t| t.data().iter().copied()).collect()
}

fn project(out: &Tensor, r: &Tensor) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub instances: usize,
    /// Instances redrawn (or coordinates dropped) near a tie or kink.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl SuiteReport {
    pub fn passed(&self, min_instances: usize) -> bool {
        self.instances >= min_instances && self.max_rel_error < self.tolerance
    }
}

/// Smallest gap between the best and second-best entry of each group of
/// `values` given by `groups` (lists of flat indices).
fn min_gap(values: &[f64], groups: &mut dyn Iterator<Item = Vec<usize>>) -> f64 {
    let mut gap = f64::INFINITY;
    for g in groups {
        let mut best = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for i in g {
            let v = values[i];
            if v > best {
                second = best;
                best = v;
            } else if v > second {
                second = v;
            }
        }
        if second > f64::NEG_INFINITY {
            gap = gap.min(best - second);
        }
    }
    gap
}

struct Instance {
    points: Vec<Tensor>,
    analytic: Vec<Tensor>,
}

/// Draws instances until `instances` of them clear the tie margin, then
/// compares gradients.
fn run_suite(
    name: &str,
    instances: usize,
    rng: &mut SeededRng,
    draw: &mut dyn FnMut(&mut SeededRng) -> Result<Option<Instance>>,
    f: &mut dyn FnMut(&[Tensor]) -> Result<f64>,
) -> Result<SuiteReport> {
    let mut report =
        SuiteReport { name: name.into(), instances: 0, skipped: 0, max_rel_error: 0.0, tolerance: TOLERANCE };
    let mut draws = 0;
    while report.instances < instances {
        draws += 1;
        if draws > MAX_REDRAWS {
            return Err(arg_err!("{name}: could not draw tie-free instances"));
        }
        let Some(inst) = draw(rng)? else {
            report.skipped += 1;
            continue;
        };
        let numeric = central_difference(f, &inst.points, EPSILON)?;
        let err = relative_error(&flatten(&inst.analytic), &flatten(&numeric));
        report.max_rel_error = report.max_rel_error.max(err);
        report.instances += 1;
    }
    Ok(report)
}

fn uniform(rng: &mut SeededRng, shape: &[usize]) -> Result<Tensor> {
    seeded_uniform(rng, shape, -1.0, 1.0)
}

pub fn dense_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = SeededRng::derived(seed, 10);
    let r = uniform(&mut rng, &[2, 3])?;
    let f = &mut |p: &[Tensor]| Ok(project(&dense(&p[0], &DenseParams::new(p[1].clone())?)?, &r));
    let draw = &mut |rng: &mut SeededRng| {
        let x = uniform(rng, &[2, 5])?;
        let w = uniform(rng, &[5, 3])?;
        let g = dense_backward(&x, &DenseParams::new(w.clone())?, &r)?;
        Ok(Some(Instance { points: vec![x, w], analytic: vec![g.input, g.weights] }))
    };
    run_suite("dense", instances, &mut rng, draw, f)
}

pub fn relu_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = SeededRng::derived(seed, 11);
    let r = uniform(&mut rng, &[3, 4])?;
    let f = &mut |p: &[Tensor]| Ok(project(&relu(&p[0]), &r));
    let draw = &mut |rng: &mut SeededRng| {
        let x = uniform(rng, &[3, 4])?;
        if x.data().iter().any(|v| v.abs() < TIE_MARGIN) {
            return Ok(None);
        }
        let g = relu_backward(&x, &r)?;
        Ok(Some(Instance { points: vec![x], analytic: vec![g] }))
    };
    run_suite("relu", instances, &mut rng, draw, f)
}

pub fn conv2d_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = SeededRng::derived(seed, 12);
    let configs = [(1usize, 0usize), (1, 1), (2, 1)];
    let mut report = SuiteReport {
        name: "conv2d".into(),
        instances: 0,
        skipped: 0,
        max_rel_error: 0.0,
        tolerance: TOLERANCE,
    };
    for (n, &(stride, pad)) in configs.iter().enumerate() {
        let share = instances / configs.len() + usize::from(n < instances % configs.len());
        let probe = ConvParams::new(Tensor::zeros(&[3, 2, 3, 3]), stride, pad)?;
        let (oh, ow) = probe.output_hw(6, 6)?;
        let r = uniform(&mut rng, &[1, 3, oh, ow])?;
        let f = &mut |p: &[Tensor]| Ok(project(&conv2d(&p[0], &ConvParams::new(p[1].clone(), stride, pad)?)?, &r));
        let draw = &mut |rng: &mut SeededRng| {
            let x = uniform(rng, &[1, 2, 6, 6])?;
            let k = uniform(rng, &[3, 2, 3, 3])?;
            let g = conv2d_backward(&x, &ConvParams::new(k.clone(), stride, pad)?, &r)?;
            Ok(Some(Instance { points: vec![x, k], analytic: vec![g.input, g.kernels] }))
        };
        let part = run_suite("conv2d", share, &mut rng, draw, f)?;
        report.instances += part.instances;
        report.skipped += part.skipped;
        report.max_rel_error = report.max_rel_error.max(part.max_rel_error);
    }
    Ok(report)
}

pub fn maxpool_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = SeededRng::derived(seed, 13);
    let shape = [2usize, 2, 4, 4];
    let r = uniform(&mut rng, &[2, 2, 2, 2])?;
    let f = &mut |p: &[Tensor]| Ok(project(&maxpool2x2(&p[0])?.0, &r));
    let draw = &mut |rng: &mut SeededRng| {
        let x = uniform(rng, &shape)?;
        let windows = (0..shape[0] * shape[1]).flat_map(|plane| {
            (0..2).flat_map(move |oy| {
                (0..2).map(move |ox| {
                    let base = plane * 16 + oy * 8 + ox * 2;
                    vec![base, base + 1, base + 4, base + 5]
                })
            })
        });
        if min_gap(x.data(), &mut windows.into_iter()) < TIE_MARGIN {
            return Ok(None);
        }
        let (_, idx) = maxpool2x2(&x)?;
        let g = maxpool2x2_backward(&r, &idx)?;
        Ok(Some(Instance { points: vec![x], analytic: vec![g] }))
    };
    run_suite("maxpool2x2", instances, &mut rng, draw, f)
}

pub fn softmax_xent_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = SeededRng::derived(seed, 14);
    let mut labels = [0usize; 4];
    for l in &mut labels {
        *l = rng.below(10);
    }
    let f = &mut |p: &[Tensor]| Ok(softmax_xent(&p[0], &labels)?.0);
    let draw = &mut |rng: &mut SeededRng| {
        let z = seeded_uniform(rng, &[4, 10], -3.0, 3.0)?;
        let (_, g) = softmax_xent(&z, &labels)?;
        Ok(Some(Instance { points: vec![z], analytic: vec![g] }))
    };
    run_suite("softmax_xent", instances, &mut rng, draw, f)
}

/// The full block: `x`, `wf` and `wm` all receive gradients.
pub fn maxplus_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = SeededRng::derived(seed, 15);
    let (b, i, j, k) = (3, 4, 6, 4);
    let r = uniform(&mut rng, &[b, k])?;
    let f = &mut |p: &[Tensor]| Ok(project(&maxplus_forward(&matmul(&p[0], &p[1])?, &p[2], None)?.0, &r));
    let draw = &mut |rng: &mut SeededRng| {
        let x = uniform(rng, &[b, i])?;
        let block = MaxPlusBlock::new(uniform(rng, &[i, j])?, uniform(rng, &[j, k])?)?;
        let y = block.features(&x)?;
        let mut sums = vec![0.0; b * j * k];
        for bb in 0..b {
            for jj in 0..j {
                for kk in 0..k {
                    sums[(bb * k + kk) * j + jj] = y.row(bb)[jj] + block.wm().row(jj)[kk];
                }
            }
        }
        if min_gap(&sums, &mut (0..b * k).map(|g| (g * j..(g + 1) * j).collect())) < TIE_MARGIN {
            return Ok(None);
        }
        let (_, winners) = maxplus_forward(&y, block.wm(), None)?;
        let (gy, gwm) = maxplus_backward(&r, &winners, j)?;
        let gx = matmul_nt(&gy, block.wf())?;
        let gwf = matmul_tn(&x, &gy)?;
        Ok(Some(Instance {
            points: vec![x, block.wf().clone(), block.wm().clone()],
            analytic: vec![gx, gwf, gwm],
        }))
    };
    run_suite("maxplus", instances, &mut rng, draw, f)
}

pub fn maxout_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = SeededRng::derived(seed, 16);
    let (b, j, g) = (3, 8, 2);
    let r = uniform(&mut rng, &[b, j / g])?;
    let f = &mut |p: &[Tensor]| Ok(project(&maxout_head(&p[0], g)?.0, &r));
    let draw = &mut |rng: &mut SeededRng| {
        let y = uniform(rng, &[b, j])?;
        if min_gap(y.data(), &mut (0..b * j / g).map(|u| (u * g..(u + 1) * g).collect())) < TIE_MARGIN {
            return Ok(None);
        }
        let (_, winners) = maxout_head(&y, g)?;
        let gy = maxout_backward(&r, &winners, j)?;
        Ok(Some(Instance { points: vec![y], analytic: vec![gy] }))
    };
    run_suite("maxout", instances, &mut rng, draw, f)
}

/// Whole-model check of `loss_and_grads` on a tiny instance of `arch`.
pub fn model_suite(arch: Arch, seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = SeededRng::derived(seed, 17);
    let dims = ImageDims { channels: 1, height: 8, width: 8 };
    let cnn = CnnShape { conv1: 2, conv2: 3, kernel: 3, hidden: 5, units: 4 };
    let mut report = SuiteReport {
        name: alloc::format!("model {arch}"),
        instances: 0,
        skipped: 0,
        max_rel_error: 0.0,
        tolerance: TOLERANCE,
    };
    for _ in 0..instances {
        let mut model = Model::init(arch, dims, 6, &cnn, 0.5, &mut rng)?;
        let x = seeded_uniform(&mut rng, &[3, dims.features()], 0.0, 1.0)?;
        let labels = [rng.below(10), rng.below(10), rng.below(10)];
        let (_, analytic) = model.loss_and_grads(&x, &labels, None)?;
        let points: Vec<Tensor> = model.params().into_iter().cloned().collect();
        let mut loss = |p: &[Tensor]| -> Result<f64> {
            for (n, t) in p.iter().enumerate() {
                model.set_param(n, t.clone())?;
            }
            Ok(softmax_xent(&model.logits(&x)?, &labels)?.0)
        };
        let coarse = central_difference(&mut loss, &points, EPSILON)?;
        let fine = central_difference(&mut loss, &points, EPSILON / 2.0)?;
        let (a, c, fi) = (flatten(&analytic), flatten(&coarse), flatten(&fine));
        let mut kept_a = Vec::with_capacity(a.len());
        let mut kept_n = Vec::with_capacity(a.len());
        for ((&av, &cv), &fv) in a.iter().zip(&c).zip(&fi) {
            if (cv - fv).abs() > 1e-7 * cv.abs().max(1.0) {
                report.skipped += 1;
            } else {
                kept_a.push(av);
                kept_n.push(cv);
            }
        }
        report.max_rel_error = report.max_rel_error.max(relative_error(&kept_a, &kept_n));
        report.instances += 1;
    }
    Ok(report)
}

/// Every layer suite, then the whole-model suites.
pub fn run_all(seed: u64, instances: usize) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        dense_suite(seed, instances)?,
        relu_suite(seed, instances)?,
        conv2d_suite(seed, instances)?,
        maxpool_suite(seed, instances)?,
        softmax_xent_suite(seed, instances)?,
        maxplus_suite(seed, instances)?,
        maxout_suite(seed, instances)?,
        model_suite(Arch::MaxPlusMlp, seed, instances.min(5))?,
        model_suite(Arch::MaxoutLinear { group: 2 }, seed, instances.min(5))?,
        model_suite(Arch::CnnPlain, seed, instances.min(3))?,
        model_suite(Arch::CnnMaxPlus, seed, instances.min(3))?,
    ])
}
