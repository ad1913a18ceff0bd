//! Synthetic per-layer embeddings whose label information is known in closed form.
//!
//! Every class `c` owns a signal direction `e_c / sqrt(2)` (the `c`-th
//! standard basis vector, scaled so that any two class centers are exactly
//! `delta` apart). At layer `l` a record of class `c` is drawn from
//! `N(delta_l * e_c / sqrt(2), I)`. Dimensions past the signal block carry
//! pure noise. Record `i` draws its label and all of its components from its
//! own generator seeded with `derive_seed(seed, i)`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embstore::{EmbeddingDataset, EmbeddingRecord, LabelSchema, StoreError};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub dim: usize,
    pub num_classes: usize,
    /// Class-center separation per layer, in units of the noise std; its length is L.
    pub layer_separations: Vec<f64>,
    /// Share of dimensions that never carry signal.
    pub noise_fraction: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Binary task with a single layer at separation `delta`.
    pub fn binary(n: usize, dim: usize, delta: f64, seed: u64) -> Self {
        Self { n, dim, num_classes: 2, layer_separations: vec![delta], noise_fraction: 0.0, seed }
    }

    pub fn num_layers(&self) -> usize {
        self.layer_separations.len()
    }

    pub fn noise_dims(&self) -> usize {
        (self.noise_fraction * self.dim as f64).round() as usize
    }

    pub fn signal_dims(&self) -> usize {
        self.dim - self.noise_dims().min(self.dim)
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        let invalid = |m: String| Err(StoreError::Invalid(m));
        if self.num_classes < 2 {
            return invalid(format!("need at least 2 classes, got {}", self.num_classes));
        }
        if self.n < self.num_classes {
            return invalid(format!("n={} is smaller than K={}", self.n, self.num_classes));
        }
        if self.layer_separations.is_empty() {
            return invalid("at least one layer separation is required".into());
        }
        if self.layer_separations.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return invalid("layer separations must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return invalid(format!("noise fraction {} outside [0, 1)", self.noise_fraction));
        }
        if self.signal_dims() < self.num_classes {
            return invalid(format!(
                "{} signal dimensions cannot hold {} orthogonal class directions",
                self.signal_dims(),
                self.num_classes
            ));
        }
        Ok(())
    }
}

pub fn class_names(num_classes: usize) -> Vec<String> {
    (0..num_classes).map(|c| format!("class_{c}")).collect()
}

fn generate_record(spec: &SynthSpec, index: usize) -> EmbeddingRecord {
    let mut g = rng::generator(rng::derive_seed(spec.seed, index as u64));
    let label = rng::uniform_index(&mut g, spec.num_classes);
    let mut values = Vec::with_capacity(spec.num_layers() * spec.dim);
    for &delta in &spec.layer_separations {
        for j in 0..spec.dim {
            let noise: f64 = StandardNormal.sample(&mut g);
            let center = if j == label { delta / std::f64::consts::SQRT_2 } else { 0.0 };
            values.push((center + noise) as f32);
        }
    }
    EmbeddingRecord::from_flat(format!("synth-{index:07}"), label, values, spec.dim)
        .expect("generated values are finite")
}

pub fn generate(spec: &SynthSpec) -> Result<EmbeddingDataset, StoreError> {
    spec.validate()?;
    let records: Vec<EmbeddingRecord> = (0..spec.n).into_par_iter().map(|i| generate_record(spec, i)).collect();
    EmbeddingDataset::new(LabelSchema::new(class_names(spec.num_classes))?, spec.num_layers(), spec.dim, records)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Optimal accuracy for two equiprobable unit-variance isotropic Gaussians
/// whose centers are `delta` apart: `Phi(delta / 2)`.
pub fn bayes_accuracy(delta: f64) -> f64 {
    if delta.is_infinite() {
        return 1.0;
    }
    normal_cdf(delta / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bayes_accuracy_reference_points() {
        assert_eq!(bayes_accuracy(0.0), 0.5);
        assert_eq!(bayes_accuracy(f64::INFINITY), 1.0);
        assert!((bayes_accuracy(2.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((bayes_accuracy(6.0) - 0.998_650_101_968_369_9).abs() < 1e-12);
        assert!(bayes_accuracy(80.0) == 1.0);
    }

    #[test]
    fn same_seed_same_dataset() {
        let spec = SynthSpec { layer_separations: vec![0.0, 2.0], ..SynthSpec::binary(50, 4, 0.0, 3) };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec { seed: 4, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn class_centers_are_delta_apart() {
        let spec = SynthSpec::binary(4000, 3, 4.0, 9);
        let ds = generate(&spec).unwrap();
        let mut sums = [[0.0f64; 3]; 2];
        let counts = ds.class_counts();
        for r in ds.records() {
            for (s, v) in sums[r.label].iter_mut().zip(r.layer(0)) {
                *s += f64::from(*v);
            }
        }
        let means: Vec<Vec<f64>> = (0..2).map(|c| sums[c].iter().map(|s| s / counts[c] as f64).collect()).collect();
        let dist = means[0].iter().zip(&means[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!((dist - 4.0).abs() < 0.15, "{dist}");
    }

    #[test]
    fn label_marginals_and_noise_dims() {
        let spec =
            SynthSpec { n: 3000, dim: 10, num_classes: 3, layer_separations: vec![3.0], noise_fraction: 0.5, seed: 1 };
        let ds = generate(&spec).unwrap();
        let expected = spec.n as f64 / 3.0;
        for c in ds.class_counts() {
            assert!((c as f64 - expected).abs() <= 3.0 * expected.sqrt());
        }
        let counts = ds.class_counts();
        for (class, &count) in counts.iter().enumerate() {
            for j in spec.signal_dims()..spec.dim {
                let mean =
                    ds.records().iter().filter(|r| r.label == class).map(|r| f64::from(r.layer(0)[j])).sum::<f64>()
                        / count as f64;
                assert!(mean.abs() < 4.0 / (count as f64).sqrt(), "{mean}");
            }
        }
    }

    #[test]
    fn invalid_specs() {
        let spec = SynthSpec { num_classes: 5, ..SynthSpec::binary(100, 4, 1.0, 0) };
        assert!(generate(&spec).is_err());
        let spec = SynthSpec { noise_fraction: 0.75, ..SynthSpec::binary(100, 4, 1.0, 0) };
        assert!(generate(&spec).is_err());
        assert!(generate(&SynthSpec::binary(100, 4, -1.0, 0)).is_err());
        assert!(generate(&SynthSpec::binary(1, 4, 1.0, 0)).is_err());
    }
}
