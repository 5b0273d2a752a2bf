//! Dataset loaders, the model file format and figure/table exporters.

mod cifar;
mod idx;
mod model_file;
mod pgm;
mod table;

use std::path::{Path, PathBuf};

pub use cifar::{load_cifar10, parse_cifar10, CIFAR_RECORD};
pub use idx::{load_idx, parse_idx, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use model_file::{decode_model, encode_model, load_model, save_model, ModelFile, MODEL_MAGIC};
pub use pgm::{export_pgm, pgm_bytes, square_image, wm_column_image};
pub use table::{export_csv, format_sig6, Cell, Table};

/// Errors raised while reading or writing files.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Bytes that do not follow the expected layout.
    #[error("format error: {0}")]
    Format(String),
    /// A file shorter or longer than its header implies.
    #[error("length error: {0}")]
    Length(String),
    /// Parts of a file (or a pair of files) that disagree with each other.
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error(transparent)]
    Engine(#[from] maxplus_core::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type IoResult<T> = Result<T, IoError>;

pub(crate) fn read_file(path: &Path) -> IoResult<Vec<u8>> {
    std::fs::read(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> IoResult<()> {
    std::fs::write(path, bytes).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}
