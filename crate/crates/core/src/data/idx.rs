//! IDX containers: a big-endian magic word, one big-endian `u32` per axis,
//! then an unsigned-byte payload.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::LabeledDataset;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxFile {
    pub magic: u32,
    pub dims: Vec<u32>,
    pub payload: Vec<u8>,
}

impl IdxFile {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated {
                expected: 4,
                actual: bytes.len(),
            });
        }
        let magic = be_u32(&bytes[0..4]);
        let rank = match magic {
            IMAGES_MAGIC => 3,
            LABELS_MAGIC => 1,
            other => return Err(Error::BadMagic(other)),
        };
        let header = 4 + 4 * rank;
        if bytes.len() < header {
            return Err(Error::Truncated {
                expected: header,
                actual: bytes.len(),
            });
        }
        let dims: Vec<u32> = (0..rank).map(|k| be_u32(&bytes[4 + 4 * k..8 + 4 * k])).collect();
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .and_then(|n| n.checked_add(header))
            .ok_or(Error::DimensionOverflow)?;
        if bytes.len() != len {
            return Err(Error::Truncated {
                expected: len,
                actual: bytes.len(),
            });
        }
        Ok(IdxFile {
            magic,
            dims,
            payload: bytes[header..].to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.payload.len());
        out.extend_from_slice(&self.magic.to_be_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(&self.payload);
        out
    }

    /// Number of items along the first axis.
    pub fn count(&self) -> usize {
        self.dims[0] as usize
    }

    /// Bytes per item.
    pub fn item_len(&self) -> usize {
        self.dims[1..].iter().map(|&d| d as usize).product()
    }
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

pub fn load_idx(path: &Path) -> Result<IdxFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    IdxFile::parse(&bytes)
}

/// How raw pixel bytes become features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelScale {
    /// `byte / 255`
    UnitInterval,
    /// `byte / 255`, then every row divided by the largest row norm.
    NormalizeByMaxNorm,
    /// `byte / 255 / factor`; used to put test data on the training scale.
    Divide(f64),
}

/// Keeps digits `a` and `b`; the smaller digit is labelled `+1`.
pub fn binary_pair(images: &IdxFile, labels: &IdxFile, a: u8, b: u8, scale: PixelScale) -> Result<LabeledDataset> {
    if a == b || a > 9 || b > 9 {
        return Err(Error::invalid(format!("digit pair must be two distinct digits in 0..=9, got ({a}, {b})")));
    }
    if images.magic != IMAGES_MAGIC || labels.magic != LABELS_MAGIC {
        return Err(Error::invalid("expected an images file and a labels file"));
    }
    if images.count() != labels.count() {
        return Err(Error::DimensionMismatch {
            what: "label count",
            expected: images.count(),
            actual: labels.count(),
        });
    }
    let (pos, neg) = (a.min(b), a.max(b));
    for digit in [pos, neg] {
        if !labels.payload.contains(&digit) {
            return Err(Error::MissingDigit(digit));
        }
    }
    let d = images.item_len();
    let keep: Vec<usize> = (0..labels.count())
        .filter(|&i| labels.payload[i] == pos || labels.payload[i] == neg)
        .collect();
    let mut feats = Array2::<f64>::zeros((keep.len(), d));
    for (row, &i) in feats.outer_iter_mut().zip(&keep) {
        let src = &images.payload[i * d..(i + 1) * d];
        for (f, &px) in row.into_iter().zip(src) {
            *f = px as f64 / 255.0;
        }
    }
    let y = Array1::from_iter(keep.iter().map(|&i| if labels.payload[i] == pos { 1.0 } else { -1.0 }));
    let data = LabeledDataset::new(feats, y)?;
    match scale {
        PixelScale::UnitInterval => Ok(data),
        PixelScale::NormalizeByMaxNorm => {
            let m = data.b_x();
            if m == 0.0 {
                return Ok(data);
            }
            data.scaled(1.0 / m)
        }
        PixelScale::Divide(f) if f > 0.0 && f.is_finite() => data.scaled(1.0 / f),
        PixelScale::Divide(f) => Err(Error::invalid(format!("divisor must be positive, got {f}"))),
    }
}

/// The four canonical files inside one directory.
#[derive(Debug, Clone)]
pub struct MnistFiles {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl MnistFiles {
    pub fn in_dir(dir: &Path) -> Self {
        MnistFiles {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [&self.train_images, &self.train_labels, &self.test_images, &self.test_labels]
    }

    pub fn exist(&self) -> bool {
        self.all().iter().all(|p| p.is_file())
    }

    /// Training pair rescaled to unit max norm and the test pair on the same scale.
    pub fn load_pair(&self, a: u8, b: u8) -> Result<(LabeledDataset, LabeledDataset)> {
        let train_images = load_idx(&self.train_images)?;
        let train_labels = load_idx(&self.train_labels)?;
        let raw = binary_pair(&train_images, &train_labels, a, b, PixelScale::UnitInterval)?;
        let max_norm = raw.b_x();
        let train = raw.scaled(1.0 / max_norm)?;
        let test = binary_pair(
            &load_idx(&self.test_images)?,
            &load_idx(&self.test_labels)?,
            a,
            b,
            PixelScale::Divide(max_norm),
        )?;
        Ok((train, test))
    }
}
