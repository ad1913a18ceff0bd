use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::probecore::aggregate_runs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    F1Macro,
    Accuracy,
    MdlBits,
    Compression,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::F1Macro => "f1_macro",
            Metric::Accuracy => "accuracy",
            Metric::MdlBits => "mdl_bits",
            Metric::Compression => "compression",
        }
    }

    /// Whether larger values mean more extractable information.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::MdlBits)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One metric value of one (task, encoder, layer, seed) cell. Layers are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub experiment: String,
    pub task: String,
    pub encoder: String,
    pub layer: usize,
    pub seed: u64,
    pub metric: Metric,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub task: String,
    pub encoder: String,
    pub layer: usize,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub n_seeds: usize,
}

/// Mean and population std over seeds for every (task, encoder, layer, metric)
/// group, in order of first appearance.
pub fn aggregate(runs: &[RunResult]) -> Vec<AggregateResult> {
    let mut order: Vec<(&str, &str, usize, Metric)> = Vec::new();
    let mut groups: HashMap<(&str, &str, usize, Metric), Vec<f64>> = HashMap::new();
    for r in runs {
        let key = (r.task.as_str(), r.encoder.as_str(), r.layer, r.metric);
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.value);
    }
    order
        .into_iter()
        .map(|key| {
            let values = &groups[&key];
            let agg = aggregate_runs(values).expect("groups are non-empty");
            AggregateResult {
                task: key.0.to_string(),
                encoder: key.1.to_string(),
                layer: key.2,
                metric: key.3,
                mean: agg.mean,
                std: agg.std,
                n_seeds: values.len(),
            }
        })
        .collect()
}

pub fn write_runs_csv<W: Write>(runs: &[RunResult], out: W) -> Result<(), RunnerError> {
    let mut writer = csv::Writer::from_writer(out);
    for r in runs {
        writer.serialize(r)?;
    }
    if runs.is_empty() {
        writer.write_record(["experiment", "task", "encoder", "layer", "seed", "metric", "value"])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_runs_csv<R: std::io::Read>(input: R) -> Result<Vec<RunResult>, RunnerError> {
    let mut reader = csv::Reader::from_reader(input);
    Ok(reader.deserialize().collect::<Result<Vec<RunResult>, _>>()?)
}

pub fn read_runs_file(path: impl AsRef<Path>) -> Result<Vec<RunResult>, RunnerError> {
    read_runs_csv(File::open(path)?)
}
