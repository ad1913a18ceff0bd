use serde::{Deserialize, Serialize};

use super::{ProbeConfig, ProbeError, ProbeNetwork, ProbeSet};
use crate::rng;

const EVAL_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Mean training cross-entropy (nats) over each epoch's mini-batches.
    pub train_losses: Vec<f64>,
    /// Validation cross-entropy (nats) after each epoch; empty without a validation set.
    pub val_losses: Vec<f64>,
    /// Learning rate used during each epoch.
    pub learning_rates: Vec<f64>,
    pub final_learning_rate: f64,
    pub best_val_loss: Option<f64>,
    /// 1-based epoch whose weights were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Mean cross-entropy of `net` on `set`, in nats.
pub fn mean_loss(net: &ProbeNetwork, set: &ProbeSet) -> Result<f64, ProbeError> {
    Ok(summed_loss(net, set)? / set.len() as f64)
}

/// Total cross-entropy of `net` on `set`, in nats, accumulated in record order.
pub fn summed_loss(net: &ProbeNetwork, set: &ProbeSet) -> Result<f64, ProbeError> {
    let mut total = 0.0;
    let mut start = 0;
    while start < set.len() {
        let end = (start + EVAL_CHUNK).min(set.len());
        let rows = set.features.slice(ndarray::s![start..end, ..]);
        total += net.example_losses(rows, &set.labels[start..end])?.iter().sum::<f64>();
        start = end;
    }
    if !total.is_finite() {
        return Err(ProbeError::NonFinite("evaluation loss"));
    }
    Ok(total)
}

fn check_sets(train: &ProbeSet, val: Option<&ProbeSet>, config: &ProbeConfig) -> Result<(), ProbeError> {
    config.validate()?;
    if train.is_empty() {
        return Err(ProbeError::Empty("training set"));
    }
    if train.dim() != config.input_dim {
        return Err(ProbeError::Dimension { expected: config.input_dim, got: train.dim() });
    }
    if train.num_classes != config.num_classes {
        return Err(ProbeError::Shape(format!(
            "training set has K={} but the probe expects K={}",
            train.num_classes, config.num_classes
        )));
    }
    if let Some(val) = val {
        if val.is_empty() {
            return Err(ProbeError::Empty("validation set"));
        }
        if val.dim() != train.dim() {
            return Err(ProbeError::Dimension { expected: train.dim(), got: val.dim() });
        }
        if val.num_classes != train.num_classes {
            return Err(ProbeError::Shape(format!(
                "validation set has K={} but training set has K={}",
                val.num_classes, train.num_classes
            )));
        }
    }
    Ok(())
}

/// Trains a fresh probe with early stopping on `val`.
///
/// After every epoch the validation loss is compared with the best so far.
/// A strictly lower loss snapshots the weights; anything else multiplies the
/// learning rate by `lr_decay_factor`, and `patience` such epochs in a row end
/// training. The snapshot with the lowest validation loss is returned.
pub fn train_probe(
    train: &ProbeSet,
    val: &ProbeSet,
    config: &ProbeConfig,
) -> Result<(ProbeNetwork, TrainReport), ProbeError> {
    check_sets(train, Some(val), config)?;
    fit(train, Some(val), config, config.max_epochs)
}

/// Trains a fresh probe for exactly `epochs` epochs with no validation signal.
pub fn train_probe_fixed_epochs(
    train: &ProbeSet,
    config: &ProbeConfig,
    epochs: usize,
) -> Result<(ProbeNetwork, TrainReport), ProbeError> {
    check_sets(train, None, config)?;
    if epochs == 0 {
        return Err(ProbeError::Config("epoch count must be positive".into()));
    }
    fit(train, None, config, epochs)
}

fn fit(
    train: &ProbeSet,
    val: Option<&ProbeSet>,
    config: &ProbeConfig,
    max_epochs: usize,
) -> Result<(ProbeNetwork, TrainReport), ProbeError> {
    let mut net = ProbeNetwork::new(config)?;
    let mut order_rng = rng::generator(rng::derive_seed(config.seed, 1));
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut lr = config.learning_rate;
    let mut report = TrainReport {
        epochs_run: 0,
        train_losses: Vec::new(),
        val_losses: Vec::new(),
        learning_rates: Vec::new(),
        final_learning_rate: lr,
        best_val_loss: None,
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best: Option<ProbeNetwork> = None;
    let mut epochs_since_best = 0;

    for epoch in 1..=max_epochs {
        rng::shuffle(&mut order_rng, &mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let features = train.features.select(ndarray::Axis(0), batch);
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let (loss, grads) = net.loss_and_grads(features.view(), &labels)?;
            net.adam_step(&grads, lr)?;
            epoch_loss += loss * batch.len() as f64;
        }
        report.epochs_run = epoch;
        report.train_losses.push(epoch_loss / train.len() as f64);
        report.learning_rates.push(lr);

        let Some(val) = val else {
            report.best_epoch = epoch;
            continue;
        };
        let val_loss = mean_loss(&net, val)?;
        report.val_losses.push(val_loss);
        if report.best_val_loss.is_none_or(|b| val_loss < b) {
            report.best_val_loss = Some(val_loss);
            report.best_epoch = epoch;
            best = Some(net.clone());
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            lr *= config.lr_decay_factor;
            if epochs_since_best >= config.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    report.final_learning_rate = lr;
    Ok((best.unwrap_or(net), report))
}
