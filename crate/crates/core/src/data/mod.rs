//! Image classification datasets: IDX and SODATA1 containers, few-shot
//! support sampling and seeded minibatching.

mod batch;
mod fewshot;
mod idx;
mod sodata;

use std::path::Path;

pub use batch::{batch_iter, epoch_order, Batches};
pub use fewshot::{sample_few_shot, FewShotTask};
pub use idx::{load_idx, parse_idx, write_idx};
pub use sodata::{load_sodata, parse_sodata, write_sodata};

use crate::error::{Error, Result};
use crate::math::Matrix;

/// Images flattened to rows with pixels in `[0, 1]`, plus integer labels.
#[derive(Clone, Debug)]
pub struct Dataset {
    images: Matrix,
    labels: Vec<usize>,
    class_count: usize,
    image_rows: usize,
    image_cols: usize,
}

impl Dataset {
    /// Builds a dataset from raw bytes (one per pixel, scaled by 1/255).
    /// `class_count` defaults to one more than the largest label.
    pub fn from_bytes(
        pixels: &[u8],
        image_rows: usize,
        image_cols: usize,
        labels: Vec<usize>,
        class_count: Option<usize>,
    ) -> Result<Self> {
        let dim = image_rows * image_cols;
        if pixels.len() != labels.len() * dim {
            return Err(Error::invalid(format!(
                "{} pixel bytes for {} images of {image_rows}x{image_cols}",
                pixels.len(),
                labels.len()
            )));
        }
        let max_label = labels.iter().copied().max();
        let class_count = class_count.unwrap_or(max_label.map_or(0, |m| m + 1));
        if let Some(m) = max_label.filter(|&m| m >= class_count) {
            return Err(Error::invalid(format!("label {m} not below class count {class_count}")));
        }
        let data = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
        Ok(Self {
            images: Matrix::from_vec(labels.len(), dim, data)?,
            labels,
            class_count,
            image_rows,
            image_cols,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Matrix {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.image_rows, self.image_cols)
    }

    pub fn feature_dim(&self) -> usize {
        self.image_rows * self.image_cols
    }

    /// Pixels back to bytes. Exact for datasets built from bytes.
    pub fn pixel_bytes(&self) -> Vec<u8> {
        self.images
            .as_slice()
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Rows and labels for the given sample indices, in that order.
    pub fn gather(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        (
            self.images.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Sample indices per class, ascending.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y].push(i);
        }
        out
    }

    /// Keeps the first `n` samples.
    pub fn truncated(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        let (images, labels) = self.gather(&idx);
        Dataset {
            images,
            labels,
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Dataset {
        Dataset {
            images: Matrix::zeros(0, self.feature_dim()),
            labels: Vec::new(),
            class_count: self.class_count,
            image_rows: self.image_rows,
            image_cols: self.image_cols,
        }
    }
}

/// Train and test splits from a directory holding the usual MNIST file
/// names (`train-images-idx3-ubyte`, `t10k-labels-idx1-ubyte`, …) or
/// `train.sodata` / `test.sodata`.
pub fn load_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let sodata = dir.join("train.sodata");
    if sodata.exists() {
        return Ok((load_sodata(&sodata)?, load_sodata(&dir.join("test.sodata"))?));
    }
    let train = load_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    let test = load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )?;
    Ok((train, test))
}
