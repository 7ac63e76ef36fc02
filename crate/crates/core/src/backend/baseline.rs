//! Hashed-feature logistic regression trained with SGD.
//!
//! Objective, over `n` examples with labels `y ∈ {0, 1}`:
//!
//! ```text
//! L(w, b) = 1/n Σ_i [ log(1 + exp(z_i)) - y_i z_i ] + l2/2 ‖w‖²,   z_i = w·x_i + b
//! ```
//!
//! The bias is not regularized. Training visits examples in a seeded random
//! order each epoch. The L2 decay is applied lazily through a global weight
//! scale so that a step costs O(nnz) instead of O(feature_dim).

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{hash_features, is_valid_dim, SparseVector};
use super::{BackendKind, ClassifierBackend, ClassifierScore};
use crate::error::BackendErrorKind;
use crate::preprocess::NormalizedInput;
use crate::{Error, Result, Task};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"RTBM";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub epochs: u32,
    pub learning_rate: f64,
    pub feature_dim: usize,
    pub l2: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            epochs: 10,
            learning_rate: 0.5,
            feature_dim: 1 << 18,
            l2: 1e-6,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.l2 >= 0.0 && self.learning_rate * self.l2 < 1.0) {
            return Err(Error::Config(format!(
                "l2 must be non-negative with learning_rate * l2 < 1, got {}",
                self.l2
            )));
        }
        if !is_valid_dim(self.feature_dim) {
            return Err(Error::Config(format!(
                "feature_dim must be a power of two >= 2, got {}",
                self.feature_dim
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub feature_dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub seed: u64,
    pub hyper: Hyperparameters,
    /// Regularized training loss after each epoch.
    pub loss_history: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl BaselineModel {
    /// A model with all-zero parameters.
    pub fn zeros(feature_dim: usize) -> Self {
        BaselineModel {
            feature_dim,
            weights: vec![0.0; feature_dim],
            bias: 0.0,
            seed: 0,
            hyper: Hyperparameters {
                feature_dim,
                ..Default::default()
            },
            loss_history: Vec::new(),
        }
    }

    pub fn features(&self, text: &str) -> SparseVector {
        hash_features(text, self.feature_dim)
    }

    pub fn margin(&self, x: &SparseVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn predict_proba(&self, input: &NormalizedInput) -> f64 {
        sigmoid(self.margin(&self.features(&input.text)))
    }

    /// Fraction of examples whose thresholded prediction (0.5, ties positive)
    /// matches the label.
    pub fn accuracy(&self, data: &[(NormalizedInput, bool)]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let correct = data
            .iter()
            .filter(|(x, y)| (self.predict_proba(x) >= 0.5) == *y)
            .count();
        correct as f64 / data.len() as f64
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(64 + 8 * (self.feature_dim + self.loss_history.len()));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.feature_dim as u32).to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&self.hyper.epochs.to_le_bytes());
        buf.extend_from_slice(&self.hyper.learning_rate.to_le_bytes());
        buf.extend_from_slice(&self.hyper.l2.to_le_bytes());
        buf.extend_from_slice(&self.bias.to_le_bytes());
        buf.extend_from_slice(&(self.loss_history.len() as u32).to_le_bytes());
        for l in &self.loss_history {
            buf.extend_from_slice(&l.to_le_bytes());
        }
        for w in &self.weights {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("not a baseline model file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let feature_dim = read_u32(&mut r)? as usize;
        if !is_valid_dim(feature_dim) {
            return Err(Error::ModelFormat(format!("invalid feature_dim {feature_dim}")));
        }
        let seed = read_u64(&mut r)?;
        let epochs = read_u32(&mut r)?;
        let learning_rate = read_f64(&mut r)?;
        let l2 = read_f64(&mut r)?;
        let bias = read_f64(&mut r)?;
        let n_loss = read_u32(&mut r)? as usize;
        if r.len() != 8 * (n_loss + feature_dim) {
            return Err(Error::ModelFormat(format!(
                "expected {} trailing bytes, found {}",
                8 * (n_loss + feature_dim),
                r.len()
            )));
        }
        let loss_history = (0..n_loss).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        let weights = (0..feature_dim).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::ModelFormat("non-finite parameters".into()));
        }
        Ok(BaselineModel {
            feature_dim,
            weights,
            bias,
            seed,
            hyper: Hyperparameters {
                epochs,
                learning_rate,
                feature_dim,
                l2,
            },
            loss_history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::corpus::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::ModelFormat("truncated model file".into()))
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut &[u8]) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut &[u8]) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Regularized objective and its gradient at `(weights, bias)`.
///
/// Returns `(loss, d loss / d weights, d loss / d bias)`.
pub fn loss_and_gradient(weights: &[f64], bias: f64, data: &[(SparseVector, f64)], l2: f64) -> (f64, Vec<f64>, f64) {
    let n = data.len() as f64;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    let mut loss = 0.0;
    for (x, y) in data {
        let z = x.dot(weights) + bias;
        loss += softplus(z) - y * z;
        let g = (sigmoid(z) - y) / n;
        for &(i, v) in &x.entries {
            grad[i as usize] += g * v;
        }
        grad_b += g;
    }
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    for (g, w) in grad.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    (loss / n + 0.5 * l2 * sq, grad, grad_b)
}

fn objective(weights: &[f64], bias: f64, data: &[(SparseVector, f64)], l2: f64) -> f64 {
    let n = data.len() as f64;
    let data_loss: f64 = data
        .iter()
        .map(|(x, y)| {
            let z = x.dot(weights) + bias;
            softplus(z) - y * z
        })
        .sum();
    data_loss / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Trains a baseline model. Deterministic for fixed data, hyperparameters and
/// seed.
pub fn train_baseline(train: &[(NormalizedInput, bool)], hyper: &Hyperparameters, seed: u64) -> Result<BaselineModel> {
    hyper.validate()?;
    let positives = train.iter().filter(|(_, y)| *y).count();
    if train.is_empty() || positives == 0 || positives == train.len() {
        return Err(Error::DegenerateTrainingSet(format!(
            "{} examples, {positives} positive; both classes are required",
            train.len()
        )));
    }

    let dim = hyper.feature_dim;
    let data: Vec<(SparseVector, f64)> = train
        .iter()
        .map(|(x, y)| (hash_features(&x.text, dim), if *y { 1.0 } else { 0.0 }))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    // w = scale * v
    let mut v = vec![0.0f64; dim];
    let mut scale = 1.0f64;
    let mut bias = 0.0f64;
    let lr = hyper.learning_rate;
    let decay = 1.0 - lr * hyper.l2;
    let mut loss_history = Vec::with_capacity(hyper.epochs as usize);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = &data[i];
            let z = scale * x.dot(&v) + bias;
            let g = sigmoid(z) - y;
            scale *= decay;
            let step = lr * g / scale;
            for &(j, val) in &x.entries {
                v[j as usize] -= step * val;
            }
            bias -= lr * g;
            if scale < 1e-9 {
                for w in &mut v {
                    *w *= scale;
                }
                scale = 1.0;
            }
        }
        let weights: Vec<f64> = v.iter().map(|w| w * scale).collect();
        let loss = objective(&weights, bias, &data, hyper.l2);
        if !loss.is_finite() {
            return Err(Error::DegenerateTrainingSet("training loss diverged".into()));
        }
        loss_history.push(loss);
    }

    let weights: Vec<f64> = v.into_iter().map(|w| w * scale).collect();
    Ok(BaselineModel {
        feature_dim: dim,
        weights,
        bias,
        seed,
        hyper: *hyper,
        loss_history,
    })
}

#[derive(Debug, Clone)]
pub struct BaselineBackend {
    id: String,
    model: Arc<BaselineModel>,
}

impl BaselineBackend {
    pub fn new(id: impl Into<String>, model: Arc<BaselineModel>) -> Self {
        BaselineBackend { id: id.into(), model }
    }

    pub fn model(&self) -> &BaselineModel {
        &self.model
    }
}

impl ClassifierBackend for BaselineBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::NativeBaseline
    }

    fn score(
        &self,
        _task: Task,
        inputs: &[NormalizedInput],
    ) -> std::result::Result<Vec<ClassifierScore>, BackendErrorKind> {
        Ok(inputs
            .iter()
            .map(|x| ClassifierScore::new(self.model.predict_proba(x)).expect("sigmoid lies in [0, 1]"))
            .collect())
    }
}
