//! Dataset flags and the train/validation/test split.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use maxplus_core::Dataset;

use super::CliError;
use crate::io::{load_cifar10, load_idx, IoError};

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Directory holding the four MNIST IDX files [env: MNIST_DIR, default: data/mnist].
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    #[arg(long)]
    pub train_images: Option<PathBuf>,
    #[arg(long)]
    pub train_labels: Option<PathBuf>,
    #[arg(long)]
    pub test_images: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Directory of CIFAR-10 binary batches; replaces MNIST when given.
    #[arg(long)]
    pub cifar_dir: Option<PathBuf>,
    /// Training images held out (from the end) as the validation set.
    #[arg(long, default_value_t = 5000)]
    pub val_size: usize,
    /// Keep only the first N training images (after the hold-out).
    #[arg(long)]
    pub limit: Option<usize>,
    /// Keep only the first N test images.
    #[arg(long)]
    pub test_limit: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Val,
    Test,
}

pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub sources: Vec<(String, PathBuf)>,
}

fn first_existing(dir: &Path, names: &[&str]) -> PathBuf {
    names.iter().map(|n| dir.join(n)).find(|p| p.exists()).unwrap_or_else(|| dir.join(names[0]))
}

impl DataArgs {
    fn mnist_dir(&self) -> PathBuf {
        self.mnist_dir
            .clone()
            .or_else(|| std::env::var_os("MNIST_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data/mnist"))
    }

    fn mnist_paths(&self) -> [PathBuf; 4] {
        let dir = self.mnist_dir();
        let pick = |flag: &Option<PathBuf>, names: &[&str]| flag.clone().unwrap_or_else(|| first_existing(&dir, names));
        [
            pick(&self.train_images, &["train-images-idx3-ubyte", "train-images.idx3-ubyte"]),
            pick(&self.train_labels, &["train-labels-idx1-ubyte", "train-labels.idx1-ubyte"]),
            pick(&self.test_images, &["t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"]),
            pick(&self.test_labels, &["t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"]),
        ]
    }

    pub fn load(&self) -> Result<Splits, CliError> {
        let (full, test, sources) = match &self.cifar_dir {
            Some(dir) => {
                let train: Vec<PathBuf> = (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect();
                let test = dir.join("test_batch.bin");
                let refs: Vec<&Path> = train.iter().map(PathBuf::as_path).collect();
                let mut sources: Vec<(String, PathBuf)> =
                    train.iter().enumerate().map(|(i, p)| (format!("train_batch_{}", i + 1), p.clone())).collect();
                sources.push(("test_batch".into(), test.clone()));
                (load_cifar10(&refs)?, load_cifar10(&[&test])?, sources)
            }
            None => {
                let [ti, tl, vi, vl] = self.mnist_paths();
                let sources = vec![
                    ("train_images".to_string(), ti.clone()),
                    ("train_labels".to_string(), tl.clone()),
                    ("test_images".to_string(), vi.clone()),
                    ("test_labels".to_string(), vl.clone()),
                ];
                (load_idx(&ti, &tl)?, load_idx(&vi, &vl)?, sources)
            }
        };
        if self.val_size >= full.len() {
            return Err(CliError::Usage(format!(
                "--val-size {} leaves no training data out of {}",
                self.val_size,
                full.len()
            )));
        }
        let (mut train, val) = full.split_tail(self.val_size).map_err(IoError::from)?;
        if let Some(n) = self.limit {
            train = train.truncate(n).map_err(IoError::from)?;
        }
        let test = match self.test_limit {
            Some(n) => test.truncate(n).map_err(IoError::from)?,
            None => test,
        };
        Ok(Splits { train, val, test, sources })
    }
}

impl Splits {
    pub fn get(&self, split: Split) -> &Dataset {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}
