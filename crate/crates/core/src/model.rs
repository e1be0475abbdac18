//! Two-layer fully connected classifier (input → hidden ReLU → logits) with
//! hand-written backpropagation and softmax cross-entropy.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Matrix, Rng};

pub const INPUT_DIM: usize = 28 * 28;
pub const HIDDEN_DIM: usize = 128;

const CHECKPOINT_MAGIC: &[u8; 6] = b"SOMLP1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TensorId {
    W1,
    B1,
    W2,
    B2,
}

impl TensorId {
    pub const ALL: [TensorId; 4] = [TensorId::W1, TensorId::B1, TensorId::W2, TensorId::B2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<TensorId> {
        Self::ALL.get(i).copied()
    }

    pub fn is_matrix(self) -> bool {
        matches!(self, TensorId::W1 | TensorId::W2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    /// hidden × input
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// classes × hidden
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// Gradients of the mean batch loss, one buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchGrad {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub loss: f64,
}

impl BatchGrad {
    pub fn tensor(&self, id: TensorId) -> &[f64] {
        match id {
            TensorId::W1 => self.w1.as_slice(),
            TensorId::B1 => &self.b1,
            TensorId::W2 => self.w2.as_slice(),
            TensorId::B2 => &self.b2,
        }
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice(),
            &self.b1,
            self.w2.as_slice(),
            &self.b2,
        ]
    }
}

/// Flat-index layout of an [`Mlp`]'s parameters: W1, B1, W2, B2 in that
/// order, matrices row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamView {
    input: usize,
    hidden: usize,
    classes: usize,
}

impl ParamView {
    pub fn len(&self, id: TensorId) -> usize {
        match id {
            TensorId::W1 => self.hidden * self.input,
            TensorId::B1 => self.hidden,
            TensorId::W2 => self.classes * self.hidden,
            TensorId::B2 => self.classes,
        }
    }

    pub fn offset(&self, id: TensorId) -> usize {
        TensorId::ALL[..id.index()].iter().map(|&t| self.len(t)).sum()
    }

    pub fn total(&self) -> usize {
        TensorId::ALL.iter().map(|&t| self.len(t)).sum()
    }

    /// Maps a flat parameter index to its tensor and (row, col); vectors use
    /// column 0.
    pub fn locate(&self, flat: usize) -> Option<(TensorId, usize, usize)> {
        let mut base = 0;
        for id in TensorId::ALL {
            let n = self.len(id);
            if flat < base + n {
                let local = flat - base;
                return Some(match id {
                    TensorId::W1 => (id, local / self.input, local % self.input),
                    TensorId::W2 => (id, local / self.hidden, local % self.hidden),
                    _ => (id, local, 0),
                });
            }
            base += n;
        }
        None
    }

    pub fn flat_index(&self, id: TensorId, row: usize, col: usize) -> usize {
        let local = match id {
            TensorId::W1 => row * self.input + col,
            TensorId::W2 => row * self.hidden + col,
            _ => row,
        };
        self.offset(id) + local
    }
}

impl Mlp {
    pub fn zeros(input: usize, hidden: usize, classes: usize) -> Self {
        Self {
            w1: Matrix::zeros(hidden, input),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(classes, hidden),
            b2: vec![0.0; classes],
        }
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init(rng: &mut Rng, input: usize, hidden: usize, classes: usize) -> Self {
        let mut m = Self::zeros(input, hidden, classes);
        let b1 = 1.0 / (input as f64).sqrt();
        for w in m.w1.as_mut_slice() {
            *w = rng.uniform_range(-b1, b1);
        }
        let b2 = 1.0 / (hidden as f64).sqrt();
        for w in m.w2.as_mut_slice() {
            *w = rng.uniform_range(-b2, b2);
        }
        m
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn class_count(&self) -> usize {
        self.w2.rows()
    }

    pub fn view(&self) -> ParamView {
        ParamView {
            input: self.input_dim(),
            hidden: self.hidden_dim(),
            classes: self.class_count(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.view().total()
    }

    pub fn tensor(&self, id: TensorId) -> &[f64] {
        match id {
            TensorId::W1 => self.w1.as_slice(),
            TensorId::B1 => &self.b1,
            TensorId::W2 => self.w2.as_slice(),
            TensorId::B2 => &self.b2,
        }
    }

    pub fn tensor_mut(&mut self, id: TensorId) -> &mut [f64] {
        match id {
            TensorId::W1 => self.w1.as_mut_slice(),
            TensorId::B1 => &mut self.b1,
            TensorId::W2 => self.w2.as_mut_slice(),
            TensorId::B2 => &mut self.b2,
        }
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for id in TensorId::ALL {
            out.extend_from_slice(self.tensor(id));
        }
        out
    }

    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape(
                "unflatten",
                format!("{} values for {} parameters", flat.len(), self.param_count()),
            ));
        }
        let mut offset = 0;
        for id in TensorId::ALL {
            let t = self.tensor_mut(id);
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        TensorId::ALL
            .iter()
            .all(|&id| self.tensor(id).iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                "forward",
                format!("input has {} features, model expects {}", x.cols(), self.input_dim()),
            ));
        }
        Ok(())
    }

    /// Hidden pre-activations `x · w1ᵀ + b1`, exploiting zero pixels.
    fn hidden_pre(&self, x: &Matrix) -> Matrix {
        let hidden = self.hidden_dim();
        let w1t = self.w1.transpose();
        let mut pre = Matrix::zeros(x.rows(), hidden);
        for b in 0..x.rows() {
            let out = pre.row_mut(b);
            out.copy_from_slice(&self.b1);
            for (k, &xv) in x.row(b).iter().enumerate() {
                if xv != 0.0 {
                    crate::math::axpy(xv, w1t.row(k), out);
                }
            }
        }
        pre
    }

    fn logits_from_hidden(&self, h: &Matrix) -> Matrix {
        let mut logits = h.matmul_transb(&self.w2).expect("hidden width matches w2");
        for b in 0..logits.rows() {
            for (l, bias) in logits.row_mut(b).iter_mut().zip(&self.b2) {
                *l += bias;
            }
        }
        logits
    }

    /// Logits for a batch `x` (B × input).
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let h = self.hidden_pre(x).relu();
        Ok(self.logits_from_hidden(&h))
    }

    /// Predicted class per row.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let logits = self.forward(x)?;
        Ok((0..logits.rows())
            .map(|b| argmax(logits.row(b)))
            .collect())
    }

    /// Exact gradient of `cross_entropy(forward(x), labels)` with respect to
    /// all four tensors.
    pub fn backward(&self, x: &Matrix, labels: &[usize]) -> Result<BatchGrad> {
        self.check_input(x)?;
        check_labels(labels, x.rows(), self.class_count())?;
        let batch = x.rows();
        let classes = self.class_count();
        let hidden = self.hidden_dim();

        let pre = self.hidden_pre(x);
        let h = pre.relu();
        let logits = self.logits_from_hidden(&h);

        let mut loss = 0.0;
        let mut dlogits = Matrix::zeros(batch, classes);
        let inv_b = 1.0 / batch as f64;
        for b in 0..batch {
            let row = logits.row(b);
            let (lse, max) = log_sum_exp(row);
            loss += lse - row[labels[b]];
            let d = dlogits.row_mut(b);
            for c in 0..classes {
                d[c] = (row[c] - max).exp() / (lse - max).exp() * inv_b;
            }
            d[labels[b]] -= inv_b;
        }
        loss *= inv_b;

        let mut gw2 = Matrix::zeros(classes, hidden);
        let mut gb2 = vec![0.0; classes];
        let mut dh = Matrix::zeros(batch, hidden);
        for b in 0..batch {
            let d = dlogits.row(b);
            for c in 0..classes {
                gb2[c] += d[c];
                crate::math::axpy(d[c], h.row(b), gw2.row_mut(c));
                crate::math::axpy(d[c], self.w2.row(c), dh.row_mut(b));
            }
        }

        let mut gb1 = vec![0.0; hidden];
        let mut gw1t = Matrix::zeros(self.input_dim(), hidden);
        for b in 0..batch {
            let p = pre.row(b);
            let dpre: Vec<f64> = dh
                .row(b)
                .iter()
                .zip(p)
                .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
                .collect();
            for (acc, v) in gb1.iter_mut().zip(&dpre) {
                *acc += v;
            }
            for (k, &xv) in x.row(b).iter().enumerate() {
                if xv != 0.0 {
                    crate::math::axpy(xv, &dpre, gw1t.row_mut(k));
                }
            }
        }

        Ok(BatchGrad {
            w1: gw1t.transpose(),
            b1: gb1,
            w2: gw2,
            b2: gb2,
            loss,
        })
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let bytes = self.to_checkpoint_bytes()?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<Mlp> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes)
    }

    /// `SOMLP1` | C: u32 | W1, B1, W2, B2 as f64, all little-endian. Only the
    /// standard 784-128-C architecture is representable.
    pub fn to_checkpoint_bytes(&self) -> Result<Vec<u8>> {
        if self.input_dim() != INPUT_DIM || self.hidden_dim() != HIDDEN_DIM {
            return Err(Error::invalid(format!(
                "checkpoints store {INPUT_DIM}-{HIDDEN_DIM}-C models, got {}-{}-{}",
                self.input_dim(),
                self.hidden_dim(),
                self.class_count()
            )));
        }
        let mut out = Vec::with_capacity(10 + 8 * self.param_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.write_u32::<LittleEndian>(self.class_count() as u32).unwrap();
        for id in TensorId::ALL {
            for &v in self.tensor(id) {
                out.write_f64::<LittleEndian>(v).unwrap();
            }
        }
        Ok(out)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Mlp> {
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 6];
        cur.read_exact(&mut magic)
            .map_err(|_| Error::format("magic", "file shorter than header"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::format("magic", format!("expected SOMLP1, got {magic:?}")));
        }
        let classes = cur
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::format("class_count", "truncated header"))? as usize;
        if classes < 2 {
            return Err(Error::format("class_count", format!("{classes} < 2")));
        }
        let mut model = Mlp::zeros(INPUT_DIM, HIDDEN_DIM, classes);
        let expected = 10 + 8 * model.param_count();
        if bytes.len() != expected {
            return Err(Error::format(
                "parameters",
                format!("expected {expected} bytes, found {}", bytes.len()),
            ));
        }
        for id in TensorId::ALL {
            for v in model.tensor_mut(id) {
                *v = cur.read_f64::<LittleEndian>().unwrap();
            }
        }
        Ok(model)
    }
}

/// Model with the default 784-128-C architecture.
pub fn init_model(rng: &mut Rng, classes: usize) -> Result<Mlp> {
    if classes < 2 {
        return Err(Error::invalid(format!("need at least 2 classes, got {classes}")));
    }
    Ok(Mlp::init(rng, INPUT_DIM, HIDDEN_DIM, classes))
}

fn check_labels(labels: &[usize], batch: usize, classes: usize) -> Result<()> {
    if labels.len() != batch {
        return Err(Error::shape(
            "labels",
            format!("{} labels for batch of {batch}", labels.len()),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {classes} classes")));
    }
    Ok(())
}

/// Returns `(log Σ exp(v), max v)`.
fn log_sum_exp(row: &[f64]) -> (f64, f64) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = row.iter().map(|&v| (v - max).exp()).sum();
    (max + s.ln(), max)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Mean softmax cross-entropy over the batch, stabilized by max-subtraction.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels(labels, logits.rows(), logits.cols())?;
    let mut total = 0.0;
    for (b, &y) in labels.iter().enumerate() {
        let row = logits.row(b);
        total += log_sum_exp(row).0 - row[y];
    }
    Ok(total / logits.rows() as f64)
}

/// Fraction of rows whose argmax equals the label, in percent.
pub fn accuracy(model: &Mlp, x: &Matrix, labels: &[usize]) -> Result<f64> {
    let pred = model.predict(x)?;
    check_labels(labels, x.rows(), model.class_count())?;
    let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(100.0 * hits as f64 / labels.len().max(1) as f64)
}
