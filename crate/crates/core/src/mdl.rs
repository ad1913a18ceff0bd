//! Online-code minimum description length of labels given representations.
//!
//! The training set is shuffled once and cut at cumulative boundaries
//! `t_1 < t_2 < ... < t_11 = n`. The first `t_1` labels are sent with a
//! uniform code (`t_1 * log2 K` bits). For each later block, a fresh probe
//! trained on everything before the block pays `-log2 p(y | x)` for every
//! example in it. The codelength is the uniform term plus the block costs;
//! fewer bits means the labels are easier to extract from the features.
//!
//! Seeds, all derived from `config.seed` with [`rng::derive_seed`]:
//! stream 0 shuffles the data, stream `i` (1..=10) seeds the probe that
//! transmits block `i + 1`, and stream 2 of that probe seed picks its
//! early-stopping holdout.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probecore::{train_probe, train_probe_fixed_epochs, ProbeConfig, ProbeError, ProbeNetwork, ProbeSet};
use crate::rng;

/// Cumulative fractions of the training set at which portions end.
pub const DEFAULT_FRACTIONS: [f64; 11] = [0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.0625, 0.125, 0.25, 0.5, 1.0];

/// Largest early-stopping holdout carved from a portion.
pub const MAX_HOLDOUT: usize = 1000;

/// Epoch budget for portions too small to spare a holdout.
pub const FIXED_EPOCHS: usize = 20;

#[derive(Debug, Error)]
pub enum MdlError {
    #[error("invalid portion fractions: {0}")]
    Fractions(String),
    #[error("{n} examples cannot form {portions} strictly increasing portions starting at {first}")]
    TooSmall { n: usize, portions: usize, first: usize },
    #[error("schedule was built for {schedule} examples but the dataset has {dataset}")]
    SizeMismatch { schedule: usize, dataset: usize },
    #[error("empty portion")]
    EmptyPortion,
    #[error(transparent)]
    Probe(#[from] ProbeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineCodeSchedule {
    pub fractions: Vec<f64>,
    /// Cumulative example counts `t_1 .. t_m`; the last equals the dataset size.
    pub boundaries: Vec<usize>,
}

impl OnlineCodeSchedule {
    pub fn num_examples(&self) -> usize {
        *self.boundaries.last().expect("schedule has boundaries")
    }

    pub fn first_portion(&self) -> usize {
        self.boundaries[0]
    }

    /// Number of transmitted blocks (boundaries minus one).
    pub fn num_blocks(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Example counts of each transmitted block.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// `t_i = round(fraction_i * n)`, then raised to at least `max(2, K)` for
/// the first boundary and one past its predecessor for the rest.
pub fn build_schedule(n: usize, num_classes: usize, fractions: &[f64]) -> Result<OnlineCodeSchedule, MdlError> {
    if fractions.len() < 2 {
        return Err(MdlError::Fractions(format!("need at least 2 fractions, got {}", fractions.len())));
    }
    if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(MdlError::Fractions("fractions must be positive".into()));
    }
    if fractions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MdlError::Fractions("fractions must be strictly increasing".into()));
    }
    if *fractions.last().unwrap() != 1.0 {
        return Err(MdlError::Fractions("the last fraction must be 1.0".into()));
    }
    let first = num_classes.max(2);
    let mut boundaries = Vec::with_capacity(fractions.len());
    for (i, f) in fractions.iter().enumerate() {
        let mut t = (f * n as f64).round() as usize;
        t = if i == 0 { t.max(first) } else { t.max(boundaries[i - 1] + 1) };
        boundaries.push(t);
    }
    if *boundaries.last().unwrap() != n {
        return Err(MdlError::TooSmall { n, portions: fractions.len(), first });
    }
    Ok(OnlineCodeSchedule { fractions: fractions.to_vec(), boundaries })
}

/// Positions (within a portion) used to fit the probe and to early-stop it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortionSplit {
    pub fit: Vec<usize>,
    /// Empty when the portion is too small; the probe then trains
    /// [`FIXED_EPOCHS`] epochs without early stopping.
    pub holdout: Vec<usize>,
}

/// Holds out `min(round(0.1 * size), MAX_HOLDOUT)` positions, at least one,
/// unless that would leave fewer than two to fit on.
pub fn within_portion_validation_split(portion_size: usize, seed: u64) -> Result<PortionSplit, MdlError> {
    if portion_size == 0 {
        return Err(MdlError::EmptyPortion);
    }
    let holdout = ((portion_size as f64 * 0.1).round() as usize).clamp(1, MAX_HOLDOUT);
    let order = rng::permutation(portion_size, seed);
    if portion_size < holdout + 2 {
        return Ok(PortionSplit { fit: order, holdout: Vec::new() });
    }
    let (held, fit) = order.split_at(holdout);
    Ok(PortionSplit { fit: fit.to_vec(), holdout: held.to_vec() })
}

/// Dataset indices seen and scored by one transmitting probe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortionPlan {
    /// 1-based portion index; the probe transmits block `portion + 1`.
    pub portion: usize,
    pub probe_seed: u64,
    pub fit: Vec<usize>,
    pub holdout: Vec<usize>,
    pub block: Vec<usize>,
}

/// The full data flow of an online-code run over `schedule.num_examples()` examples.
pub fn plan_online_code(schedule: &OnlineCodeSchedule, seed: u64) -> Result<Vec<PortionPlan>, MdlError> {
    let order = rng::permutation(schedule.num_examples(), rng::derive_seed(seed, 0));
    schedule
        .boundaries
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let probe_seed = rng::derive_seed(seed, i as u64 + 1);
            let portion = &order[..w[0]];
            let split = within_portion_validation_split(portion.len(), rng::derive_seed(probe_seed, 2))?;
            Ok(PortionPlan {
                portion: i + 1,
                probe_seed,
                fit: split.fit.iter().map(|&p| portion[p]).collect(),
                holdout: split.holdout.iter().map(|&p| portion[p]).collect(),
                block: order[w[0]..w[1]].to_vec(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodelengthReport {
    pub t1: usize,
    pub uniform_bits: f64,
    pub block_bits: Vec<f64>,
    /// `uniform_bits + (block_bits summed in order)`.
    pub total_bits: f64,
    /// `n * log2 K / total_bits`.
    pub compression: f64,
}

impl CodelengthReport {
    pub fn assemble(n: usize, num_classes: usize, t1: usize, block_bits: Vec<f64>) -> Self {
        let bits_per_label = (num_classes as f64).log2();
        let uniform_bits = t1 as f64 * bits_per_label;
        let total_bits = uniform_bits + block_bits.iter().sum::<f64>();
        Self { t1, uniform_bits, block_bits, total_bits, compression: n as f64 * bits_per_label / total_bits }
    }
}

fn transmit_block(data: &ProbeSet, config: &ProbeConfig, plan: &PortionPlan) -> Result<f64, MdlError> {
    let probe_config = ProbeConfig { seed: plan.probe_seed, ..config.clone() };
    let fit = data.select(&plan.fit);
    let net: ProbeNetwork = if plan.holdout.is_empty() {
        train_probe_fixed_epochs(&fit, &probe_config, FIXED_EPOCHS)?.0
    } else {
        train_probe(&fit, &data.select(&plan.holdout), &probe_config)?.0
    };
    let block = data.select(&plan.block);
    let nats = crate::probecore::summed_loss(&net, &block)?;
    Ok(nats / std::f64::consts::LN_2)
}

/// Online codelength of `train`'s labels, in bits.
pub fn online_codelength(
    train: &ProbeSet,
    config: &ProbeConfig,
    schedule: &OnlineCodeSchedule,
) -> Result<CodelengthReport, MdlError> {
    if schedule.num_examples() != train.len() {
        return Err(MdlError::SizeMismatch { schedule: schedule.num_examples(), dataset: train.len() });
    }
    let plans = plan_online_code(schedule, config.seed)?;
    let block_bits =
        plans.par_iter().map(|plan| transmit_block(train, config, plan)).collect::<Result<Vec<f64>, MdlError>>()?;
    Ok(CodelengthReport::assemble(train.len(), train.num_classes, schedule.first_portion(), block_bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use std::collections::HashSet;

    #[test]
    fn default_schedule_for_ten_thousand() {
        let s = build_schedule(10_000, 2, &DEFAULT_FRACTIONS).unwrap();
        assert_eq!(s.boundaries, vec![10, 20, 40, 80, 160, 320, 625, 1250, 2500, 5000, 10_000]);
        assert_eq!(s.num_blocks(), 10);
    }

    #[test]
    fn exact_rounding_scales_linearly() {
        let a = build_schedule(10_000, 2, &DEFAULT_FRACTIONS).unwrap();
        let b = build_schedule(100_000, 2, &DEFAULT_FRACTIONS).unwrap();
        for (x, y) in a.boundaries.iter().zip(&b.boundaries) {
            assert_eq!(x * 10, *y);
        }
    }

    #[test]
    fn degenerate_sizes() {
        assert!(matches!(build_schedule(11, 2, &DEFAULT_FRACTIONS), Err(MdlError::TooSmall { .. })));
        let s = build_schedule(12, 2, &DEFAULT_FRACTIONS).unwrap();
        assert_eq!(s.boundaries, (2..=12).collect::<Vec<_>>());
        let s = build_schedule(2048, 5, &DEFAULT_FRACTIONS).unwrap();
        assert_eq!(s.boundaries[0], 5);
        assert!(s.boundaries.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fraction_validation() {
        assert!(build_schedule(100, 2, &[0.5, 0.4, 1.0]).is_err());
        assert!(build_schedule(100, 2, &[0.5, 0.9]).is_err());
        assert!(build_schedule(100, 2, &[1.0]).is_err());
    }

    #[test]
    fn portion_holdout_sizes() {
        let s = within_portion_validation_split(100, 1).unwrap();
        assert_eq!((s.fit.len(), s.holdout.len()), (90, 10));
        let s = within_portion_validation_split(3, 1).unwrap();
        assert_eq!((s.fit.len(), s.holdout.len()), (2, 1));
        let s = within_portion_validation_split(2, 1).unwrap();
        assert_eq!((s.fit.len(), s.holdout.len()), (2, 0));
        let s = within_portion_validation_split(50_000, 1).unwrap();
        assert_eq!(s.holdout.len(), MAX_HOLDOUT);
        assert!(matches!(within_portion_validation_split(0, 1), Err(MdlError::EmptyPortion)));
    }

    #[test]
    fn plans_never_leak_blocks_into_training() {
        let schedule = build_schedule(500, 2, &DEFAULT_FRACTIONS).unwrap();
        let plans = plan_online_code(&schedule, 17).unwrap();
        assert_eq!(plans.len(), 10);
        for (plan, size) in plans.iter().zip(schedule.block_sizes()) {
            let seen: HashSet<usize> = plan.fit.iter().chain(&plan.holdout).copied().collect();
            let block: HashSet<usize> = plan.block.iter().copied().collect();
            assert!(seen.is_disjoint(&block));
            assert_eq!(seen.len(), schedule.boundaries[plan.portion - 1]);
            assert_eq!(block.len(), size);
        }
    }

    #[test]
    fn accounting_identity_and_determinism() {
        let n = 64;
        let features = Array2::from_shape_fn((n, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let labels = (0..n).map(|i| usize::from((i * 7) % 11 > 5)).collect();
        let data = ProbeSet::new(features, labels, 2).unwrap();
        let mut cfg = ProbeConfig::new(3, 2).with_hidden_dim(8).with_seed(5);
        cfg.max_epochs = 10;
        let schedule = build_schedule(n, 2, &DEFAULT_FRACTIONS).unwrap();
        let report = online_codelength(&data, &cfg, &schedule).unwrap();
        assert_eq!(report.t1, 2);
        assert_eq!(report.uniform_bits, 2.0);
        assert_eq!(report.block_bits.len(), 10);
        assert!(report.block_bits.iter().all(|&b| b >= 0.0));
        assert_eq!(report.total_bits, report.uniform_bits + report.block_bits.iter().sum::<f64>());
        assert_eq!(report, online_codelength(&data, &cfg, &schedule).unwrap());
        let json = serde_json::to_value(&report).unwrap();
        for key in ["t1", "uniform_bits", "block_bits", "total_bits", "compression"] {
            assert!(json.get(key).is_some(), "{key}");
        }

        let wrong = build_schedule(100, 2, &DEFAULT_FRACTIONS).unwrap();
        assert!(matches!(online_codelength(&data, &cfg, &wrong), Err(MdlError::SizeMismatch { .. })));
    }
}
