use std::collections::BTreeMap;

use super::{AggregateResult, Metric, RunnerError};
use crate::costmodel::{gain_table, GainRow, SizeScores};

/// Mean F1 gain (percentage points) between consecutive encoders of `ordering`.
///
/// Each encoder contributes its macro-F1 aggregate at the highest probed
/// layer of every task, scaled to percent.
pub fn compare_encoders(aggregates: &[AggregateResult], ordering: &[&str]) -> Result<Vec<GainRow>, RunnerError> {
    if ordering.len() < 2 {
        return Err(RunnerError::InvalidSpec("encoder comparison needs at least two encoders".into()));
    }
    let mut sizes = Vec::with_capacity(ordering.len());
    for &encoder in ordering {
        let mut best: BTreeMap<String, (usize, f64)> = BTreeMap::new();
        for a in aggregates.iter().filter(|a| a.encoder == encoder && a.metric == Metric::F1Macro) {
            let entry = best.entry(a.task.clone()).or_insert((a.layer, a.mean));
            if a.layer > entry.0 {
                *entry = (a.layer, a.mean);
            }
        }
        if best.is_empty() {
            return Err(RunnerError::MissingEncoder(encoder.to_string()));
        }
        let scores = best.into_iter().map(|(task, (_, f1))| (task, vec![100.0 * f1])).collect();
        sizes.push(SizeScores { label: encoder.to_string(), scores });
    }
    Ok(gain_table(&sizes)?)
}
