//! Dataset ingestion: IDX (MNIST family) and CIFAR-10 binary readers,
//! grayscale conversion, deterministic splits and input-field encoding.

pub mod cifar;
pub mod encode;
pub mod idx;

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{encode, EncodingMode, EncodingSpec};

/// ITU-R 601 luma weights, the coefficients used by the usual
/// rgb-to-grayscale conversions in ML frameworks.
pub const LUMA_WEIGHTS: (f64, f64, f64) = (0.2989, 0.5870, 0.1140);

/// Environment variable naming the dataset root directory.
pub const DATA_DIR_ENV: &str = "DIFFNET_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetId {
    Mnist,
    Fashion,
    Cifar10,
}

impl DatasetId {
    pub fn num_classes(&self) -> usize {
        10
    }

    /// Canonical (train pool, validation, test) sizes.
    pub fn canonical_sizes(&self) -> (usize, usize, usize) {
        match self {
            DatasetId::Mnist | DatasetId::Fashion => (55_000, 5_000, 10_000),
            DatasetId::Cifar10 => (45_000, 5_000, 10_000),
        }
    }

    /// Default encoding: handwritten digits are amplitude objects, the
    /// other datasets are phase objects.
    pub fn default_encoding(&self) -> EncodingSpec {
        match self {
            DatasetId::Mnist => EncodingSpec::amplitude(),
            DatasetId::Fashion | DatasetId::Cifar10 => EncodingSpec::phase(),
        }
    }

    pub fn dir_name(&self) -> &'static str {
        match self {
            DatasetId::Mnist => "mnist",
            DatasetId::Fashion => "fashion",
            DatasetId::Cifar10 => "cifar10",
        }
    }
}

impl std::str::FromStr for DatasetId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetId::Mnist),
            "fashion" => Ok(DatasetId::Fashion),
            "cifar10" => Ok(DatasetId::Cifar10),
            other => Err(Error::Config(format!(
                "unknown dataset `{other}` (expected mnist, fashion or cifar10)"
            ))),
        }
    }
}

/// A grayscale image with its class label; pixel values live in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub pixels: Vec<f32>,
    pub width: usize,
    pub height: usize,
    pub label: u8,
}

impl LabeledImage {
    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }
}

/// An RGB image still awaiting grayscale conversion.
#[derive(Debug, Clone)]
pub struct RgbImage {
    pub record: cifar::CifarRecord,
}

/// Weighted luma conversion, clamped to [0, 1].
pub fn to_grayscale(rgb: &RgbImage) -> LabeledImage {
    let (wr, wg, wb) = LUMA_WEIGHTS;
    let side = cifar::IMAGE_SIDE;
    let mut pixels = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            let (r, g, b) = rgb.record.pixel(row, col);
            let gray =
                wr * (r as f64 / 255.0) + wg * (g as f64 / 255.0) + wb * (b as f64 / 255.0);
            pixels.push(gray.clamp(0.0, 1.0) as f32);
        }
    }
    LabeledImage {
        pixels,
        width: side,
        height: side,
        label: rgb.record.label,
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Load one IDX image/label file pair (gzip-transparent).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Vec<LabeledImage>> {
    let images = idx::parse_images(&idx::decompress(&read_file(images_path)?)?)?;
    let labels = idx::parse_labels(&idx::decompress(&read_file(labels_path)?)?)?;
    if images.count != labels.len() {
        return Err(Error::Format {
            offset: 4,
            message: format!(
                "{} images but {} labels ({} vs {})",
                images.count,
                labels.len(),
                images_path.display(),
                labels_path.display()
            ),
        });
    }
    let per_image = images.rows * images.cols;
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| LabeledImage {
            pixels: images.pixels[i * per_image..(i + 1) * per_image]
                .iter()
                .map(|&b| b as f32 / 255.0)
                .collect(),
            width: images.cols,
            height: images.rows,
            label,
        })
        .collect())
}

/// Load CIFAR-10 binary batches, keeping RGB.
pub fn load_cifar10(paths: &[PathBuf]) -> Result<Vec<RgbImage>> {
    let mut out = Vec::new();
    for path in paths {
        let records = cifar::parse_batch(&read_file(path)?)
            .map_err(|e| match e {
                Error::Format { offset, message } => Error::Format {
                    offset,
                    message: format!("{}: {message}", path.display()),
                },
                other => other,
            })?;
        out.extend(records.into_iter().map(|record| RgbImage { record }));
    }
    Ok(out)
}

/// Training-pool/validation/test index sets. The test set is the dataset's
/// canonical test file; validation is carved from the training pool by a
/// seeded shuffle (the last `val_size` entries of the shuffled order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl DatasetSplits {
    pub fn new(pool_len: usize, val_size: usize, split_seed: u64) -> Result<Self> {
        if val_size >= pool_len {
            return Err(Error::Config(format!(
                "validation size {val_size} must be smaller than the pool ({pool_len})"
            )));
        }
        let mut order: Vec<usize> = (0..pool_len).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(split_seed, "splits", 0));
        order.shuffle(&mut rng);
        let validation = order.split_off(pool_len - val_size);
        Ok(Self {
            train: order,
            validation,
        })
    }
}

/// A fully loaded dataset: the training pool, the canonical test set and
/// the split indices into the pool.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub id: DatasetId,
    pub pool: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
    pub splits: DatasetSplits,
}

/// Resolve the on-disk directory for a dataset under `root` (or the
/// `DIFFNET_DATA_DIR` environment variable when `root` is `None`).
pub fn dataset_dir(root: Option<&Path>, id: DatasetId) -> PathBuf {
    let base = root.map(Path::to_path_buf).unwrap_or_else(|| {
        std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("data"))
    });
    base.join(id.dir_name())
}

/// Find `name` or `name.gz` under `dir`.
fn existing(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    if plain.exists() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.exists() {
        return Ok(gz);
    }
    Err(Error::io(
        &plain,
        std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("dataset file {name}[.gz] not found under {}", dir.display()),
        ),
    ))
}

impl Dataset {
    /// Load a dataset with its canonical splits.
    pub fn load(root: Option<&Path>, id: DatasetId, split_seed: u64) -> Result<Self> {
        let dir = dataset_dir(root, id);
        let (pool, test) = match id {
            DatasetId::Mnist | DatasetId::Fashion => {
                let pool = load_idx(
                    &existing(&dir, "train-images-idx3-ubyte")?,
                    &existing(&dir, "train-labels-idx1-ubyte")?,
                )?;
                let test = load_idx(
                    &existing(&dir, "t10k-images-idx3-ubyte")?,
                    &existing(&dir, "t10k-labels-idx1-ubyte")?,
                )?;
                (pool, test)
            }
            DatasetId::Cifar10 => {
                let train_paths: Vec<PathBuf> = (1..=5)
                    .map(|i| existing(&dir, &format!("data_batch_{i}.bin")))
                    .collect::<Result<_>>()?;
                let pool = load_cifar10(&train_paths)?
                    .iter()
                    .map(to_grayscale)
                    .collect();
                let test = load_cifar10(&[existing(&dir, "test_batch.bin")?])?
                    .iter()
                    .map(to_grayscale)
                    .collect();
                (pool, test)
            }
        };
        let (train_size, val_size, test_size) = id.canonical_sizes();
        if pool.len() != train_size + val_size {
            return Err(Error::Format {
                offset: 0,
                message: format!(
                    "{:?} training pool holds {} samples, expected {}",
                    id,
                    pool.len(),
                    train_size + val_size
                ),
            });
        }
        if test.len() != test_size {
            return Err(Error::Format {
                offset: 0,
                message: format!(
                    "{:?} test set holds {} samples, expected {test_size}",
                    id,
                    test.len()
                ),
            });
        }
        let splits = DatasetSplits::new(pool.len(), val_size, split_seed)?;
        Ok(Self {
            id,
            pool,
            test,
            splits,
        })
    }

    pub fn train_images(&self, limit: Option<usize>) -> Vec<&LabeledImage> {
        let n = limit.unwrap_or(self.splits.train.len()).min(self.splits.train.len());
        self.splits.train[..n].iter().map(|&i| &self.pool[i]).collect()
    }

    pub fn validation_images(&self, limit: Option<usize>) -> Vec<&LabeledImage> {
        let n = limit
            .unwrap_or(self.splits.validation.len())
            .min(self.splits.validation.len());
        self.splits.validation[..n]
            .iter()
            .map(|&i| &self.pool[i])
            .collect()
    }

    pub fn test_images(&self, limit: Option<usize>) -> Vec<&LabeledImage> {
        let n = limit.unwrap_or(self.test.len()).min(self.test.len());
        self.test[..n].iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_weights() {
        let mk = |r: u8, g: u8, b: u8| {
            let mut rgb = vec![0u8; cifar::RECORD_BYTES - 1];
            rgb[0] = r;
            rgb[cifar::PLANE_BYTES] = g;
            rgb[2 * cifar::PLANE_BYTES] = b;
            RgbImage {
                record: cifar::CifarRecord { label: 0, rgb },
            }
        };
        let white = to_grayscale(&mk(255, 255, 255));
        assert!((white.pixel(0, 0) as f64 - 0.9999).abs() < 1e-4);
        let black = to_grayscale(&mk(0, 0, 0));
        assert_eq!(black.pixel(0, 0), 0.0);
        let green = to_grayscale(&mk(0, 255, 0));
        assert!((green.pixel(0, 0) as f64 - 0.5870).abs() < 1e-6);
    }

    #[test]
    fn byte_255_normalizes_to_exactly_one() {
        assert_eq!(255_f32 / 255.0, 1.0);
    }

    #[test]
    fn splits_are_disjoint_and_deterministic() {
        let a = DatasetSplits::new(1000, 100, 7).unwrap();
        let b = DatasetSplits::new(1000, 100, 7).unwrap();
        assert_eq!(a, b);
        let c = DatasetSplits::new(1000, 100, 8).unwrap();
        assert_ne!(a, c);

        assert_eq!(a.train.len(), 900);
        assert_eq!(a.validation.len(), 100);
        let mut all: Vec<usize> = a.train.iter().chain(&a.validation).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }
}
