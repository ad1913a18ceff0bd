use serde::{Deserialize, Serialize};

use super::{EmbeddingDataset, StoreError};
use crate::rng;

/// Train/validation/test fractions plus the seed of the shuffle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8, val_fraction: 0.1, test_fraction: 0.1, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), StoreError> {
        let fractions = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(StoreError::Invalid(format!("split fractions must be positive, got {fractions:?}")));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(StoreError::Invalid(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Part sizes for `n` records: validation and test get `round(n * fraction)`,
    /// train takes the rest.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize), StoreError> {
        self.validate()?;
        let val = (n as f64 * self.val_fraction).round() as usize;
        let test = (n as f64 * self.test_fraction).round() as usize;
        if val == 0 {
            return Err(StoreError::EmptySplit { part: "validation", n });
        }
        if test == 0 {
            return Err(StoreError::EmptySplit { part: "test", n });
        }
        if val + test >= n {
            return Err(StoreError::EmptySplit { part: "train", n });
        }
        Ok((n - val - test, val, test))
    }
}

/// Shuffles record positions with the seeded Fisher–Yates permutation and
/// cuts it into train, validation and test, in that order.
pub fn split_dataset(
    dataset: &EmbeddingDataset,
    spec: &SplitSpec,
) -> Result<(EmbeddingDataset, EmbeddingDataset, EmbeddingDataset), StoreError> {
    if dataset.is_empty() {
        return Err(StoreError::Invalid("cannot split an empty dataset".into()));
    }
    let (n_train, n_val, _) = spec.sizes(dataset.len())?;
    let order = rng::permutation(dataset.len(), spec.seed);
    let (train, rest) = order.split_at(n_train);
    let (val, test) = rest.split_at(n_val);
    Ok((dataset.select(train), dataset.select(val), dataset.select(test)))
}

/// Uniform sample of `n` records without replacement. The first `n` entries
/// of the seeded permutation are kept, in their original relative order.
pub fn subsample(dataset: &EmbeddingDataset, n: usize, seed: u64) -> Result<EmbeddingDataset, StoreError> {
    if n > dataset.len() {
        return Err(StoreError::SampleTooLarge { requested: n, available: dataset.len() });
    }
    let mut chosen = rng::permutation(dataset.len(), seed);
    chosen.truncate(n);
    chosen.sort_unstable();
    Ok(dataset.with_records(chosen.into_iter().map(|i| dataset.records()[i].clone()).collect()))
}
