//! The two-layer feed-forward probe: network, optimizer, training schedule
//! and classification metrics.

mod metrics;
mod network;
mod train;

pub use metrics::{aggregate_runs, evaluate, f1_score, Aggregate, Averaging, ConfusionMatrix, Evaluation};
pub use network::{ProbeNetwork, ProbeParams};
pub use train::{mean_loss, summed_loss, train_probe, train_probe_fixed_epochs, TrainReport};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embstore::EmbeddingDataset;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid probe config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub lr_decay_factor: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl ProbeConfig {
    pub const DEFAULT_HIDDEN_DIM: usize = 256;

    pub fn new(input_dim: usize, num_classes: usize) -> Self {
        Self {
            input_dim,
            hidden_dim: Self::DEFAULT_HIDDEN_DIM,
            num_classes,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            lr_decay_factor: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_hidden_dim(mut self, hidden_dim: usize) -> Self {
        self.hidden_dim = hidden_dim;
        self
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        let bad = |m: String| Err(ProbeError::Config(m));
        if self.input_dim == 0 || self.hidden_dim == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return bad(format!(
                "dimensions, batch size and epoch budget must be positive ({} / {} / {} / {})",
                self.input_dim, self.hidden_dim, self.batch_size, self.max_epochs
            ));
        }
        if self.num_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.num_classes));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return bad(format!("lr_decay_factor must lie in (0, 1), got {}", self.lr_decay_factor));
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("adam parameters out of range".into());
        }
        Ok(())
    }
}

/// One layer of an [`EmbeddingDataset`] as a dense `n x d` matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl ProbeSet {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self, ProbeError> {
        if features.nrows() != labels.len() {
            return Err(ProbeError::Shape(format!("{} feature rows but {} labels", features.nrows(), labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(ProbeError::Shape(format!("label {bad} out of range for K={num_classes}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(ProbeError::NonFinite("features"));
        }
        Ok(Self { features, labels, num_classes })
    }

    /// Features of the 0-based `layer`.
    pub fn from_dataset(dataset: &EmbeddingDataset, layer: usize) -> Result<Self, ProbeError> {
        if layer >= dataset.num_layers() {
            return Err(ProbeError::Shape(format!(
                "layer index {layer} out of range for {} layers",
                dataset.num_layers()
            )));
        }
        let d = dataset.dim();
        let mut features = Array2::zeros((dataset.len(), d));
        for (mut row, record) in features.outer_iter_mut().zip(dataset.records()) {
            for (dst, src) in row.iter_mut().zip(record.layer(layer)) {
                *dst = f64::from(*src);
            }
        }
        let labels = dataset.records().iter().map(|r| r.label).collect();
        Ok(Self { features, labels, num_classes: dataset.num_classes() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}
