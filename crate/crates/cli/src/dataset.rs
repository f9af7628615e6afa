//! Dataset descriptors and loaders.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use actnorm::mlp::Dataset;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CIFAR_PIXELS: usize = 3072;
pub const CIFAR_RECORD: usize = CIFAR_PIXELS + 1;
const CIFAR_TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
const CIFAR_TEST_FILE: &str = "test_batch.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    SyntheticBlobs,
    Cifar10Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetDescriptor {
    pub kind: DatasetKind,
    pub classes: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub input_dim: usize,
    /// Directory holding the CIFAR-10 binary batches.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Standardize every feature with train-split statistics.
    pub normalize: bool,
    /// Standard deviation of the synthetic class centres; per-sample noise has unit variance.
    pub separation: f64,
    pub seed: u64,
}

impl Default for DatasetDescriptor {
    fn default() -> Self {
        DatasetDescriptor {
            kind: DatasetKind::SyntheticBlobs,
            classes: 10,
            train_samples: 2000,
            test_samples: 1000,
            input_dim: 128,
            path: None,
            normalize: true,
            separation: 1.0,
            seed: 1234,
        }
    }
}

impl DatasetDescriptor {
    pub fn validate(&self) -> CliResult<()> {
        if self.classes < 2 {
            return Err(CliError::config("dataset.classes", "must be >= 2"));
        }
        if self.train_samples == 0 {
            return Err(CliError::config("dataset.train_samples", "must be positive"));
        }
        if self.test_samples == 0 {
            return Err(CliError::config("dataset.test_samples", "must be positive"));
        }
        if self.input_dim == 0 {
            return Err(CliError::config("dataset.input_dim", "must be positive"));
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return Err(CliError::config("dataset.separation", "must be finite and >= 0"));
        }
        if self.kind == DatasetKind::Cifar10Binary {
            if self.path.is_none() {
                return Err(CliError::config("dataset.path", "required for cifar10-binary"));
            }
            if self.input_dim != CIFAR_PIXELS {
                return Err(CliError::config("dataset.input_dim", format!("cifar10-binary has {CIFAR_PIXELS} features")));
            }
        }
        Ok(())
    }
}

pub fn load_dataset(d: &DatasetDescriptor) -> CliResult<Dataset> {
    d.validate()?;
    let mut data = match d.kind {
        DatasetKind::SyntheticBlobs => synthetic_blobs(d),
        DatasetKind::Cifar10Binary => load_cifar(d)?,
    };
    if d.normalize {
        standardize(&mut data);
    }
    Ok(data)
}

/// Gaussian blobs: class centres `μ_c ~ N(0, separation²·I)`, samples `μ_c + N(0, I)`,
/// labels assigned round-robin.
fn synthetic_blobs(d: &DatasetDescriptor) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let centres = DMatrix::from_fn(d.input_dim, d.classes, |_, _| d.separation * normal());
    let mut split = |n: usize| {
        let labels: Vec<usize> = (0..n).map(|i| i % d.classes).collect();
        let x = DMatrix::from_fn(d.input_dim, n, |i, j| centres[(i, labels[j])] + normal());
        (x, labels)
    };
    let (train_x, train_y) = split(d.train_samples);
    let (test_x, test_y) = split(d.test_samples);
    Dataset::new(train_x, train_y, test_x, test_y, d.classes).expect("generator produces consistent splits")
}

/// One file of CIFAR-10 binary records: `(label, 3072 pixels)` per 3073 bytes.
pub fn read_cifar_file(path: &Path) -> CliResult<(Vec<u8>, Vec<u8>)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::fs(path, e))?;
    if bytes.len() % CIFAR_RECORD != 0 {
        let whole = bytes.len() / CIFAR_RECORD;
        return Err(CliError::Format {
            path: path.into(),
            offset: (whole * CIFAR_RECORD) as u64,
            detail: format!(
                "file length {} is not a multiple of the {CIFAR_RECORD}-byte record size",
                bytes.len()
            ),
        });
    }
    let mut labels = Vec::with_capacity(bytes.len() / CIFAR_RECORD);
    let mut pixels = Vec::with_capacity(bytes.len() / CIFAR_RECORD * CIFAR_PIXELS);
    for (i, rec) in bytes.chunks_exact(CIFAR_RECORD).enumerate() {
        if rec[0] > 9 {
            return Err(CliError::Format {
                path: path.into(),
                offset: (i * CIFAR_RECORD) as u64,
                detail: format!("label byte {} outside 0..=9", rec[0]),
            });
        }
        labels.push(rec[0]);
        pixels.extend_from_slice(&rec[1..]);
    }
    Ok((labels, pixels))
}

fn cifar_split(files: &[PathBuf], limit: usize) -> CliResult<(DMatrix<f64>, Vec<usize>)> {
    let mut labels = Vec::new();
    let mut pixels = Vec::new();
    for f in files {
        if labels.len() >= limit {
            break;
        }
        let (l, p) = read_cifar_file(f)?;
        labels.extend(l.iter().map(|&v| v as usize));
        pixels.extend_from_slice(&p);
    }
    let n = labels.len().min(limit);
    labels.truncate(n);
    let x = DMatrix::from_column_slice(CIFAR_PIXELS, n, &pixels[..n * CIFAR_PIXELS]).map(|v: u8| v as f64 / 255.0);
    Ok((x, labels))
}

fn load_cifar(d: &DatasetDescriptor) -> CliResult<Dataset> {
    let dir = d.path.as_deref().expect("validated");
    let train_files: Vec<PathBuf> = CIFAR_TRAIN_FILES.iter().map(|f| dir.join(f)).collect();
    let (train_x, train_y) = cifar_split(&train_files, d.train_samples)?;
    let (test_x, test_y) = cifar_split(&[dir.join(CIFAR_TEST_FILE)], d.test_samples)?;
    Dataset::new(train_x, train_y, test_x, test_y, 10).map_err(CliError::from)
}

/// Per-feature standardization with train statistics, applied to both splits.
/// Constant features are centred only.
pub fn standardize(data: &mut Dataset) {
    let n = data.train_x.ncols() as f64;
    let mean: DVector<f64> = data.train_x.column_mean();
    let var = DVector::from_iterator(
        mean.len(),
        data.train_x.row_iter().zip(mean.iter()).map(|(r, m)| r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n),
    );
    let scale = var.map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 });
    for x in [&mut data.train_x, &mut data.test_x] {
        for mut col in x.column_iter_mut() {
            col -= &mean;
            col.component_mul_assign(&scale);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_shapes() {
        let d = DatasetDescriptor::default();
        let data = load_dataset(&d).unwrap();
        assert_eq!(data.train_x.shape(), (128, 2000));
        assert_eq!(data.train_y.len(), 2000);
        assert_eq!(data.test_x.shape(), (128, 1000));
        assert!(data.train_y.iter().all(|&y| y < 10));
    }

    #[test]
    fn normalized_features() {
        let data = load_dataset(&DatasetDescriptor::default()).unwrap();
        let n = data.train_x.ncols() as f64;
        for row in data.train_x.row_iter() {
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 0.05);
            assert!((var - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let d = DatasetDescriptor::default();
        assert_eq!(load_dataset(&d).unwrap().train_x, load_dataset(&d).unwrap().train_x);
    }
}
