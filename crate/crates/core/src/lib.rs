//! Max-plus (morphological dilation) blocks on top of a small dense-tensor engine.
//!
//! A max-plus block is a bias-free linear layer `y = x · wf` followed by a
//! dilation `z_k = max_j (y_j + wm[j, k])`. After training, each output unit
//! leans on a handful of the linear filters, which makes the block a natural
//! filter selector and lets it be pruned into a linear map followed by a max
//! over uneven groups.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, dataset loaders and
//! the command-line driver live in the `maxplus` crate.
//!
//! Module map:
//!
//! - [`tensor`], [`rng`]: dense `f64` tensors and the seeded generator.
//! - [`layers`]: dense, ReLU, conv2d, 2x2 max-pooling, softmax cross-entropy.
//! - [`maxplus`]: the max-plus layer, connection dropout, filter selection,
//!   collision detection, the Maxout baseline head and the two-output
//!   piecewise-linear construction.
//! - [`model`], [`train`]: architectures, initialization, SGD with momentum,
//!   evaluation and the seed/dropout study.
//! - [`pruning`]: threshold pruning, the uneven-group head, equivalence checks
//!   and accuracy sweeps.
//! - [`gradcheck`]: central finite-difference suites for every layer.

#![no_std]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod maxplus;
pub mod model;
pub mod pruning;
pub mod rng;
pub mod tensor;
pub mod train;

pub use data::{Dataset, ImageDims};
pub use error::{Error, Result};
pub use maxplus::{MaxPlusBlock, Winners};
pub use model::{Arch, Model};
pub use rng::SeededRng;
pub use tensor::{Indices, Tensor};
pub use train::{MetricsLog, TrainConfig};
