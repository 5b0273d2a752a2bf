//! Architectures built from the layers and the max-plus block.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::{ImageDims, NUM_CLASSES};
use crate::error::{arg_err, dim_err, Error, Result};
use crate::layers::{
    conv2d, conv2d_backward, dense, dense_weight_grad, maxpool2x2, maxpool2x2_backward, relu, relu_backward,
    softmax_xent, ConvParams, DenseParams, PoolIndices,
};
use crate::maxplus::{maxout_backward, maxout_head, maxplus_backward, maxplus_forward, DropMask, MaxPlusBlock};
use crate::pruning::{pruned_forward, GroupEntry, PrunedHead};
use crate::rng::SeededRng;
use crate::tensor::{matmul_nt, seeded_uniform, Tensor};

/// The trainable architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    /// Flattened image, then one max-plus block with `J` filters.
    MaxPlusMlp,
    /// Single dense layer onto the class logits.
    SoftmaxLinear,
    /// Dense layer onto `10 * group` units, then a max over each group.
    MaxoutLinear { group: usize },
    /// Convolutional trunk, then a max-plus block over the last hidden layer.
    CnnMaxPlus,
    /// Convolutional trunk, then two dense layers.
    CnnPlain,
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arch::MaxPlusMlp => f.write_str("maxplus-mlp"),
            Arch::SoftmaxLinear => f.write_str("softmax-linear"),
            Arch::MaxoutLinear { group } => write!(f, "maxout-linear({group})"),
            Arch::CnnMaxPlus => f.write_str("cnn-maxplus"),
            Arch::CnnPlain => f.write_str("cnn-plain"),
        }
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "maxplus-mlp" => Ok(Arch::MaxPlusMlp),
            "softmax-linear" => Ok(Arch::SoftmaxLinear),
            "maxout-linear" => Ok(Arch::MaxoutLinear { group: 2 }),
            "cnn-maxplus" => Ok(Arch::CnnMaxPlus),
            "cnn-plain" => Ok(Arch::CnnPlain),
            other => {
                let group = other
                    .strip_prefix("maxout-linear(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|g| g.trim().parse::<usize>().ok())
                    .filter(|&g| g > 0)
                    .ok_or_else(|| arg_err!("unknown architecture `{other}`"))?;
                Ok(Arch::MaxoutLinear { group })
            }
        }
    }
}

impl Arch {
    pub fn is_cnn(&self) -> bool {
        matches!(self, Arch::CnnMaxPlus | Arch::CnnPlain)
    }

    pub fn has_maxplus_head(&self) -> bool {
        matches!(self, Arch::MaxPlusMlp | Arch::CnnMaxPlus)
    }
}

/// Widths of the convolutional architectures. The defaults are the CIFAR-10
/// layout: two 5x5 conv layers of 64 channels, each followed by ReLU and 2x2
/// max-pooling, then dense layers of 384 and 192 units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnShape {
    pub conv1: usize,
    pub conv2: usize,
    pub kernel: usize,
    pub hidden: usize,
    pub units: usize,
}

impl Default for CnnShape {
    fn default() -> Self {
        Self { conv1: 64, conv2: 64, kernel: 5, hidden: 384, units: 192 }
    }
}

/// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

fn glorot(rng: &mut SeededRng, rows: usize, cols: usize) -> Result<Tensor> {
    let b = glorot_bound(rows, cols);
    seeded_uniform(rng, &[rows, cols], -b, b)
}

fn glorot_kernels(rng: &mut SeededRng, out_c: usize, in_c: usize, k: usize) -> Result<Tensor> {
    let b = glorot_bound(in_c * k * k, out_c * k * k);
    seeded_uniform(rng, &[out_c, in_c, k, k], -b, b)
}

/// conv, ReLU, pool, conv, ReLU, pool, flatten, dense, ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnTrunk {
    pub input: ImageDims,
    pub conv1: ConvParams,
    pub conv2: ConvParams,
    pub fc1: DenseParams,
}

struct TrunkCache {
    x: Tensor,
    c1: Tensor,
    p1: PoolIndices,
    r1p: Tensor,
    c2: Tensor,
    p2: PoolIndices,
    flat: Tensor,
    h: Tensor,
}

impl CnnTrunk {
    pub fn init(rng: &mut SeededRng, input: ImageDims, shape: &CnnShape) -> Result<Self> {
        let pad = shape.kernel / 2;
        let conv1 = ConvParams::new(glorot_kernels(rng, shape.conv1, input.channels, shape.kernel)?, 1, pad)?;
        let conv2 = ConvParams::new(glorot_kernels(rng, shape.conv2, shape.conv1, shape.kernel)?, 1, pad)?;
        let flat = Self::flat_width(&conv1, &conv2, input)?;
        let fc1 = DenseParams::new(glorot(rng, flat, shape.hidden)?)?;
        Self::new(input, conv1, conv2, fc1)
    }

    pub fn new(input: ImageDims, conv1: ConvParams, conv2: ConvParams, fc1: DenseParams) -> Result<Self> {
        let flat = Self::flat_width(&conv1, &conv2, input)?;
        if fc1.inputs() != flat {
            return Err(dim_err!("fc1 expects {} inputs, conv trunk yields {flat}", fc1.inputs()));
        }
        Ok(Self { input, conv1, conv2, fc1 })
    }

    fn flat_width(conv1: &ConvParams, conv2: &ConvParams, input: ImageDims) -> Result<usize> {
        if conv1.kernels.shape()[1] != input.channels || conv2.kernels.shape()[1] != conv1.kernels.shape()[0] {
            return Err(dim_err!("conv channel counts do not chain"));
        }
        let (h1, w1) = conv1.output_hw(input.height, input.width)?;
        if h1 % 2 != 0 || w1 % 2 != 0 {
            return Err(dim_err!("first conv output {h1}x{w1} cannot be pooled 2x2"));
        }
        let (h2, w2) = conv2.output_hw(h1 / 2, w1 / 2)?;
        if h2 % 2 != 0 || w2 % 2 != 0 {
            return Err(dim_err!("second conv output {h2}x{w2} cannot be pooled 2x2"));
        }
        Ok(conv2.kernels.shape()[0] * (h2 / 2) * (w2 / 2))
    }

    /// Width of the trunk output.
    pub fn outputs(&self) -> usize {
        self.fc1.outputs()
    }

    fn forward_cached(&self, x: &Tensor) -> Result<(Tensor, TrunkCache)> {
        let (b, d) = x.dims2()?;
        if d != self.input.features() {
            return Err(dim_err!("trunk expects {} features, got {d}", self.input.features()));
        }
        let x = x.reshape(&[b, self.input.channels, self.input.height, self.input.width])?;
        let c1 = conv2d(&x, &self.conv1)?;
        let (r1p, p1) = maxpool2x2(&relu(&c1))?;
        let c2 = conv2d(&r1p, &self.conv2)?;
        let (r2p, p2) = maxpool2x2(&relu(&c2))?;
        let flat = r2p.reshape(&[b, r2p.len() / b])?;
        let h = dense(&flat, &self.fc1)?;
        let a = relu(&h);
        Ok((a, TrunkCache { x, c1, p1, r1p, c2, p2, flat, h }))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_cached(x)?.0)
    }

    /// Gradients for `[conv1, conv2, fc1]`.
    fn backward(&self, cache: &TrunkCache, grad_a: &Tensor) -> Result<[Tensor; 3]> {
        let gh = relu_backward(&cache.h, grad_a)?;
        let gfc1 = dense_weight_grad(&cache.flat, &gh)?;
        let gflat = matmul_nt(&gh, &self.fc1.weights)?;
        let s = cache.p2.input_shape();
        let gr2p = gflat.reshape(&[s[0], s[1], s[2] / 2, s[3] / 2])?;
        let gc2 = relu_backward(&cache.c2, &maxpool2x2_backward(&gr2p, &cache.p2)?)?;
        let g2 = conv2d_backward(&cache.r1p, &self.conv2, &gc2)?;
        let gc1 = relu_backward(&cache.c1, &maxpool2x2_backward(&g2.input, &cache.p1)?)?;
        let g1 = conv2d_backward(&cache.x, &self.conv1, &gc1)?;
        Ok([g1.kernels, g2.kernels, gfc1])
    }

    fn params(&self) -> [&Tensor; 3] {
        [&self.conv1.kernels, &self.conv2.kernels, &self.fc1.weights]
    }

    fn params_mut(&mut self) -> [&mut Tensor; 3] {
        [&mut self.conv1.kernels, &mut self.conv2.kernels, &mut self.fc1.weights]
    }
}

/// A classifier with parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    MaxPlusMlp { block: MaxPlusBlock },
    SoftmaxLinear { dense: DenseParams },
    MaxoutLinear { dense: DenseParams, group: usize },
    CnnMaxPlus { trunk: CnnTrunk, block: MaxPlusBlock },
    CnnPlain { trunk: CnnTrunk, fc2: DenseParams, fc3: DenseParams },
    /// A pruned max-plus head, optionally behind a conv trunk. Inference only.
    Pruned { trunk: Option<CnnTrunk>, head: PrunedHead },
}

impl Model {
    /// Fresh parameters for `arch` on inputs of size `dims`. `units` is `J`
    /// for `maxplus-mlp`; the CNN widths come from `cnn`.
    pub fn init(
        arch: Arch,
        dims: ImageDims,
        units: usize,
        cnn: &CnnShape,
        wm_init: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let inputs = dims.features();
        let wm = |rng: &mut SeededRng, j: usize| -> Result<Tensor> {
            if wm_init > 0.0 {
                seeded_uniform(rng, &[j, NUM_CLASSES], -wm_init, wm_init)
            } else {
                Ok(Tensor::zeros(&[j, NUM_CLASSES]))
            }
        };
        if units == 0 {
            return Err(arg_err!("units must be positive"));
        }
        Ok(match arch {
            Arch::MaxPlusMlp => {
                let wf = glorot(rng, inputs, units)?;
                Model::MaxPlusMlp { block: MaxPlusBlock::new(wf, wm(rng, units)?)? }
            }
            Arch::SoftmaxLinear => Model::SoftmaxLinear { dense: DenseParams::new(glorot(rng, inputs, NUM_CLASSES)?)? },
            Arch::MaxoutLinear { group } => {
                if group == 0 {
                    return Err(arg_err!("maxout group size must be positive"));
                }
                let dense = DenseParams::new(glorot(rng, inputs, NUM_CLASSES * group)?)?;
                Model::MaxoutLinear { dense, group }
            }
            Arch::CnnMaxPlus => {
                let trunk = CnnTrunk::init(rng, dims, cnn)?;
                let wf = glorot(rng, trunk.outputs(), cnn.units)?;
                let block = MaxPlusBlock::new(wf, wm(rng, cnn.units)?)?;
                Model::CnnMaxPlus { trunk, block }
            }
            Arch::CnnPlain => {
                let trunk = CnnTrunk::init(rng, dims, cnn)?;
                let fc2 = DenseParams::new(glorot(rng, trunk.outputs(), cnn.units)?)?;
                let fc3 = DenseParams::new(glorot(rng, cnn.units, NUM_CLASSES)?)?;
                Model::CnnPlain { trunk, fc2, fc3 }
            }
        })
    }

    /// Architecture tag used in logs and model files.
    pub fn arch(&self) -> String {
        match self {
            Model::MaxPlusMlp { .. } => Arch::MaxPlusMlp.to_string(),
            Model::SoftmaxLinear { .. } => Arch::SoftmaxLinear.to_string(),
            Model::MaxoutLinear { group, .. } => Arch::MaxoutLinear { group: *group }.to_string(),
            Model::CnnMaxPlus { .. } => Arch::CnnMaxPlus.to_string(),
            Model::CnnPlain { .. } => Arch::CnnPlain.to_string(),
            Model::Pruned { trunk: Some(_), .. } => "pruned-cnn".into(),
            Model::Pruned { trunk: None, .. } => "pruned-mlp".into(),
        }
    }

    /// Flattened input width.
    pub fn inputs(&self) -> usize {
        match self {
            Model::MaxPlusMlp { block } => block.inputs(),
            Model::SoftmaxLinear { dense } | Model::MaxoutLinear { dense, .. } => dense.inputs(),
            Model::CnnMaxPlus { trunk, .. } | Model::CnnPlain { trunk, .. } | Model::Pruned { trunk: Some(trunk), .. } => {
                trunk.input.features()
            }
            Model::Pruned { trunk: None, head } => head.inputs(),
        }
    }

    pub fn trunk(&self) -> Option<&CnnTrunk> {
        match self {
            Model::CnnMaxPlus { trunk, .. } | Model::CnnPlain { trunk, .. } | Model::Pruned { trunk: Some(trunk), .. } => {
                Some(trunk)
            }
            _ => None,
        }
    }

    pub fn maxplus_block(&self) -> Option<&MaxPlusBlock> {
        match self {
            Model::MaxPlusMlp { block } | Model::CnnMaxPlus { block, .. } => Some(block),
            _ => None,
        }
    }

    pub fn maxplus_block_mut(&mut self) -> Option<&mut MaxPlusBlock> {
        match self {
            Model::MaxPlusMlp { block } | Model::CnnMaxPlus { block, .. } => Some(block),
            _ => None,
        }
    }

    /// What the head sees: the trunk output for CNNs, the input otherwise.
    pub fn head_inputs(&self, x: &Tensor) -> Result<Tensor> {
        match self.trunk() {
            Some(t) => t.forward(x),
            None => Ok(x.clone()),
        }
    }

    /// Class scores for a batch of flattened images (`B x I`).
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Model::MaxPlusMlp { block } => block.forward(x),
            Model::SoftmaxLinear { dense: d } => dense(x, d),
            Model::MaxoutLinear { dense: d, group } => Ok(maxout_head(&dense(x, d)?, *group)?.0),
            Model::CnnMaxPlus { trunk, block } => block.forward(&trunk.forward(x)?),
            Model::CnnPlain { trunk, fc2, fc3 } => dense(&relu(&dense(&trunk.forward(x)?, fc2)?), fc3),
            Model::Pruned { trunk, head } => match trunk {
                Some(t) => pruned_forward(&t.forward(x)?, head),
                None => pruned_forward(x, head),
            },
        }
    }

    /// Trainable parameters in a fixed order.
    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Model::MaxPlusMlp { block } => vec![block.wf(), block.wm()],
            Model::SoftmaxLinear { dense } | Model::MaxoutLinear { dense, .. } => vec![&dense.weights],
            Model::CnnMaxPlus { trunk, block } => {
                let mut p = trunk.params().to_vec();
                p.extend([block.wf(), block.wm()]);
                p
            }
            Model::CnnPlain { trunk, fc2, fc3 } => {
                let mut p = trunk.params().to_vec();
                p.extend([&fc2.weights, &fc3.weights]);
                p
            }
            Model::Pruned { .. } => Vec::new(),
        }
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Model::MaxPlusMlp { block } => block.params_mut().into_iter().collect(),
            Model::SoftmaxLinear { dense } | Model::MaxoutLinear { dense, .. } => vec![&mut dense.weights],
            Model::CnnMaxPlus { trunk, block } => {
                let mut p: Vec<&mut Tensor> = trunk.params_mut().into_iter().collect();
                p.extend(block.params_mut());
                p
            }
            Model::CnnPlain { trunk, fc2, fc3 } => {
                let mut p: Vec<&mut Tensor> = trunk.params_mut().into_iter().collect();
                p.extend([&mut fc2.weights, &mut fc3.weights]);
                p
            }
            Model::Pruned { .. } => Vec::new(),
        }
    }

    /// Overwrites one trainable parameter tensor (same shape required).
    pub fn set_param(&mut self, index: usize, value: Tensor) -> Result<()> {
        let mut params = self.params_mut();
        let n = params.len();
        let slot = params.get_mut(index).ok_or_else(|| arg_err!("parameter {index} of {n}"))?;
        if slot.shape() != value.shape() {
            return Err(dim_err!("parameter {index} is {:?}, got {:?}", slot.shape(), value.shape()));
        }
        **slot = value;
        if let Some(b) = self.maxplus_block() {
            MaxPlusBlock::new(b.wf().clone(), b.wm().clone())?;
        }
        Ok(())
    }

    /// Mean cross-entropy on a batch and its gradient for every parameter in
    /// [`Model::params`] order. `mask` applies only to max-plus heads.
    pub fn loss_and_grads(&self, x: &Tensor, labels: &[usize], mask: Option<&DropMask>) -> Result<(f64, Vec<Tensor>)> {
        let maxplus_head = |block: &MaxPlusBlock, inp: &Tensor| -> Result<(f64, Tensor, Tensor, Tensor)> {
            let y = block.features(inp)?;
            let (z, winners) = maxplus_forward(&y, block.wm(), mask)?;
            let (loss, gz) = softmax_xent(&z, labels)?;
            let (gy, gwm) = maxplus_backward(&gz, &winners, block.units())?;
            let gwf = dense_weight_grad(inp, &gy)?;
            Ok((loss, gy, gwf, gwm))
        };
        match self {
            Model::MaxPlusMlp { block } => {
                let (loss, _, gwf, gwm) = maxplus_head(block, x)?;
                Ok((loss, vec![gwf, gwm]))
            }
            Model::SoftmaxLinear { dense: d } => {
                let (loss, gz) = softmax_xent(&dense(x, d)?, labels)?;
                Ok((loss, vec![dense_weight_grad(x, &gz)?]))
            }
            Model::MaxoutLinear { dense: d, group } => {
                let y = dense(x, d)?;
                let (z, winners) = maxout_head(&y, *group)?;
                let (loss, gz) = softmax_xent(&z, labels)?;
                let gy = maxout_backward(&gz, &winners, d.outputs())?;
                Ok((loss, vec![dense_weight_grad(x, &gy)?]))
            }
            Model::CnnMaxPlus { trunk, block } => {
                let (a, cache) = trunk.forward_cached(x)?;
                let (loss, gy, gwf, gwm) = maxplus_head(block, &a)?;
                let ga = matmul_nt(&gy, block.wf())?;
                let [g1, g2, g3] = trunk.backward(&cache, &ga)?;
                Ok((loss, vec![g1, g2, g3, gwf, gwm]))
            }
            Model::CnnPlain { trunk, fc2, fc3 } => {
                let (a, cache) = trunk.forward_cached(x)?;
                let h2 = dense(&a, fc2)?;
                let a2 = relu(&h2);
                let (loss, gz) = softmax_xent(&dense(&a2, fc3)?, labels)?;
                let gfc3 = dense_weight_grad(&a2, &gz)?;
                let gh2 = relu_backward(&h2, &matmul_nt(&gz, &fc3.weights)?)?;
                let gfc2 = dense_weight_grad(&a, &gh2)?;
                let ga = matmul_nt(&gh2, &fc2.weights)?;
                let [g1, g2, g3] = trunk.backward(&cache, &ga)?;
                Ok((loss, vec![g1, g2, g3, gfc2, gfc3]))
            }
            Model::Pruned { .. } => Err(arg_err!("pruned models are inference-only")),
        }
    }

    /// Copies conv and first dense weights from `source` (transfer learning).
    pub fn adopt_trunk(&mut self, source: &Model) -> Result<()> {
        let src = source.trunk().ok_or_else(|| arg_err!("source model `{}` has no conv trunk", source.arch()))?;
        let dst = match self {
            Model::CnnMaxPlus { trunk, .. } | Model::CnnPlain { trunk, .. } => trunk,
            _ => return Err(arg_err!("model has no conv trunk")),
        };
        if dst.params().iter().zip(src.params()).any(|(a, b)| a.shape() != b.shape()) || dst.input != src.input {
            return Err(dim_err!("trunk shapes differ"));
        }
        *dst = src.clone();
        Ok(())
    }

    /// Flat description for serialization.
    pub fn to_parts(&self) -> ModelParts {
        let mut meta = Vec::new();
        let mut tensors: Vec<(String, Tensor)> = Vec::new();
        let trunk_parts = |t: &CnnTrunk, meta: &mut Vec<(String, String)>, tensors: &mut Vec<(String, Tensor)>| {
            meta.push(("input".into(), format!("{}x{}x{}", t.input.channels, t.input.height, t.input.width)));
            meta.push(("conv_padding".into(), format!("{}", t.conv1.padding)));
            meta.push(("conv_stride".into(), format!("{}", t.conv1.stride)));
            tensors.push(("conv1".into(), t.conv1.kernels.clone()));
            tensors.push(("conv2".into(), t.conv2.kernels.clone()));
            tensors.push(("fc1".into(), t.fc1.weights.clone()));
        };
        match self {
            Model::MaxPlusMlp { block } => {
                tensors.push(("wf".into(), block.wf().clone()));
                tensors.push(("wm".into(), block.wm().clone()));
            }
            Model::SoftmaxLinear { dense } => tensors.push(("dense".into(), dense.weights.clone())),
            Model::MaxoutLinear { dense, group } => {
                meta.push(("group".into(), format!("{group}")));
                tensors.push(("dense".into(), dense.weights.clone()));
            }
            Model::CnnMaxPlus { trunk, block } => {
                trunk_parts(trunk, &mut meta, &mut tensors);
                tensors.push(("wf".into(), block.wf().clone()));
                tensors.push(("wm".into(), block.wm().clone()));
            }
            Model::CnnPlain { trunk, fc2, fc3 } => {
                trunk_parts(trunk, &mut meta, &mut tensors);
                tensors.push(("fc2".into(), fc2.weights.clone()));
                tensors.push(("fc3".into(), fc3.weights.clone()));
            }
            Model::Pruned { trunk, head } => {
                if let Some(t) = trunk {
                    trunk_parts(t, &mut meta, &mut tensors);
                }
                let as_f64 = |v: &[usize]| Tensor::vector(v.iter().map(|&u| u as f64).collect()).unwrap();
                let filters: Vec<usize> = head.groups().iter().flatten().map(|e| e.filter).collect();
                let offsets: Vec<f64> = head.groups().iter().flatten().map(|e| e.offset).collect();
                tensors.push(("retained_filters".into(), head.retained_filters().clone()));
                tensors.push(("source".into(), as_f64(head.source())));
                tensors.push(("group_sizes".into(), as_f64(&head.partition())));
                tensors.push(("group_filters".into(), as_f64(&filters)));
                tensors.push(("group_offsets".into(), Tensor::vector(offsets).unwrap()));
            }
        }
        let head = match self {
            Model::MaxPlusMlp { .. } | Model::CnnMaxPlus { .. } => "maxplus",
            Model::SoftmaxLinear { .. } | Model::CnnPlain { .. } => "dense",
            Model::MaxoutLinear { .. } => "maxout",
            Model::Pruned { .. } => "uneven-groups",
        };
        ModelParts { arch: self.arch(), head: head.into(), meta, tensors }
    }

    pub fn from_parts(parts: &ModelParts) -> Result<Self> {
        let take = |name: &str| -> Result<Tensor> {
            parts
                .tensors
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| arg_err!("model `{}` is missing tensor `{name}`", parts.arch))
        };
        let meta = |key: &str| -> Result<&str> {
            parts
                .meta
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| arg_err!("model `{}` is missing key `{key}`", parts.arch))
        };
        let number = |key: &str| -> Result<usize> {
            meta(key)?.parse().map_err(|_| arg_err!("key `{key}` is not a number"))
        };
        let trunk = || -> Result<CnnTrunk> {
            let dims: Vec<usize> = meta("input")?
                .split('x')
                .map(|d| d.parse().map_err(|_| arg_err!("bad input dims")))
                .collect::<Result<_>>()?;
            let [c, h, w] = dims[..] else { return Err(arg_err!("bad input dims")) };
            let (pad, stride) = (number("conv_padding")?, number("conv_stride")?);
            CnnTrunk::new(
                ImageDims { channels: c, height: h, width: w },
                ConvParams::new(take("conv1")?, stride, pad)?,
                ConvParams::new(take("conv2")?, stride, pad)?,
                DenseParams::new(take("fc1")?)?,
            )
        };
        let block = || MaxPlusBlock::new(take("wf")?, take("wm")?);
        match parts.arch.as_str() {
            "pruned-cnn" | "pruned-mlp" => {
                let indices = |name: &str| -> Result<Vec<usize>> {
                    take(name)?
                        .data()
                        .iter()
                        .map(|&v| {
                            if v >= 0.0 && libm::trunc(v) == v && v < usize::MAX as f64 {
                                Ok(v as usize)
                            } else {
                                Err(arg_err!("tensor `{name}` holds a non-index value {v}"))
                            }
                        })
                        .collect()
                };
                let sizes = indices("group_sizes")?;
                let filters = indices("group_filters")?;
                let offsets = take("group_offsets")?.into_data();
                if sizes.iter().sum::<usize>() != filters.len() || filters.len() != offsets.len() {
                    return Err(dim_err!("group tables disagree"));
                }
                let mut groups = Vec::with_capacity(sizes.len());
                let mut at = 0;
                for n in sizes {
                    groups.push(
                        (at..at + n)
                            .map(|i| GroupEntry { filter: filters[i], offset: offsets[i] })
                            .collect(),
                    );
                    at += n;
                }
                let head = PrunedHead::new(take("retained_filters")?, indices("source")?, groups)?;
                let trunk = if parts.arch == "pruned-cnn" { Some(trunk()?) } else { None };
                Ok(Model::Pruned { trunk, head })
            }
            tag => match tag.parse::<Arch>()? {
                Arch::MaxPlusMlp => Ok(Model::MaxPlusMlp { block: block()? }),
                Arch::SoftmaxLinear => Ok(Model::SoftmaxLinear { dense: DenseParams::new(take("dense")?)? }),
                Arch::MaxoutLinear { group } => {
                    let dense = DenseParams::new(take("dense")?)?;
                    if group != number("group")? || dense.outputs() % group != 0 {
                        return Err(dim_err!("maxout group does not match its dense layer"));
                    }
                    Ok(Model::MaxoutLinear { dense, group })
                }
                Arch::CnnMaxPlus => {
                    let (trunk, block) = (trunk()?, block()?);
                    if block.inputs() != trunk.outputs() {
                        return Err(dim_err!("head expects {} inputs, trunk yields {}", block.inputs(), trunk.outputs()));
                    }
                    Ok(Model::CnnMaxPlus { trunk, block })
                }
                Arch::CnnPlain => {
                    let trunk = trunk()?;
                    let fc2 = DenseParams::new(take("fc2")?)?;
                    let fc3 = DenseParams::new(take("fc3")?)?;
                    if fc2.inputs() != trunk.outputs() || fc3.inputs() != fc2.outputs() {
                        return Err(dim_err!("dense layers do not chain"));
                    }
                    Ok(Model::CnnPlain { trunk, fc2, fc3 })
                }
            },
        }
    }
}

/// A model as named tensors plus string metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParts {
    pub arch: String,
    pub head: String,
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<(String, Tensor)>,
}
