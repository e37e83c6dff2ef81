//! Synthetic margin data and MNIST IDX ingestion.

mod idx;
mod synthetic;

pub use idx::{binary_pair, load_idx, IdxFile, MnistFiles, PixelScale, IMAGES_MAGIC, LABELS_MAGIC};
pub use synthetic::{gen_synthetic, read_csv, write_csv, SyntheticSpec};
