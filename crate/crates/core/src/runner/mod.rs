//! Experiment grids over tasks, encoders, layers and seeds.
//!
//! Every cell of the grid is independent: its result depends only on the
//! embedding file, the split, the probe settings, the layer and the seed.
//! Cells run on a worker pool. Each finished cell is appended to
//! `journal.csv` in the output directory so an interrupted run can resume;
//! once all cells succeed the journal is replaced by the canonical, sorted
//! `runs.csv` and `aggregates.json`.

mod compare;
mod report;
mod results;

pub use compare::compare_encoders;
pub use report::{emit_report, layer_chart_frame, render_layer_chart, render_overview, ChartFrame, ReportFormat};
pub use results::{aggregate, read_runs_csv, read_runs_file, write_runs_csv, AggregateResult, Metric, RunResult};

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costmodel::CostError;
use crate::embstore::{read_dataset, split_dataset, EmbeddingDataset, SplitSpec, StoreError};
use crate::mdl::{build_schedule, online_codelength, DEFAULT_FRACTIONS};
use crate::probecore::{evaluate, train_probe, Averaging, ProbeConfig, ProbeSet};

pub const RUNS_FILE: &str = "runs.csv";
pub const AGGREGATES_FILE: &str = "aggregates.json";
pub const JOURNAL_FILE: &str = "journal.csv";

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("task {task:?}, encoder {encoder:?}: {source}")]
    Data {
        task: String,
        encoder: String,
        #[source]
        source: StoreError,
    },
    #[error("task {task:?}, encoder {encoder:?}: layer {layer} is outside 1..={num_layers}")]
    LayerOutOfRange { task: String, encoder: String, layer: usize, num_layers: usize },
    #[error("task {task:?}, encoder {encoder:?}: {message}")]
    SchemaMismatch { task: String, encoder: String, message: String },
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("encoder {0:?} has no f1_macro results")]
    MissingEncoder(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeMode {
    #[default]
    Classic,
    Mdl,
    LayerwiseClassic,
    LayerwiseMdl,
}

impl ProbeMode {
    pub fn is_layerwise(self) -> bool {
        matches!(self, ProbeMode::LayerwiseClassic | ProbeMode::LayerwiseMdl)
    }

    pub fn is_mdl(self) -> bool {
        matches!(self, ProbeMode::Mdl | ProbeMode::LayerwiseMdl)
    }

    pub fn metrics(self) -> [Metric; 2] {
        if self.is_mdl() {
            [Metric::MdlBits, Metric::Compression]
        } else {
            [Metric::F1Macro, Metric::Accuracy]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKeyword {
    Last,
    All,
}

/// `"last"`, `"all"`, or an explicit list of 1-based layer indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerSelection {
    Keyword(LayerKeyword),
    Explicit(Vec<usize>),
}

impl LayerSelection {
    pub fn resolve(&self, num_layers: usize) -> Vec<usize> {
        match self {
            LayerSelection::Keyword(LayerKeyword::Last) => vec![num_layers],
            LayerSelection::Keyword(LayerKeyword::All) => (1..=num_layers).collect(),
            LayerSelection::Explicit(layers) => layers.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    /// Embedding file; `{encoder}` is replaced by the encoder name.
    #[serde(default)]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub name: String,
    /// Embedding file template; `{task}` is replaced by the task name. Takes
    /// precedence over the task's path.
    #[serde(default)]
    pub path: Option<String>,
}

/// Probe settings that override the defaults of [`ProbeConfig::new`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeOverrides {
    pub hidden_dim: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub lr_decay_factor: Option<f64>,
}

impl ProbeOverrides {
    pub fn apply(&self, mut config: ProbeConfig) -> ProbeConfig {
        if let Some(v) = self.hidden_dim {
            config.hidden_dim = v;
        }
        if let Some(v) = self.learning_rate {
            config.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = self.max_epochs {
            config.max_epochs = v;
        }
        if let Some(v) = self.patience {
            config.patience = v;
        }
        if let Some(v) = self.lr_decay_factor {
            config.lr_decay_factor = v;
        }
        config
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub tasks: Vec<TaskSpec>,
    pub encoders: Vec<EncoderSpec>,
    #[serde(default)]
    pub mode: ProbeMode,
    /// Defaults to the last layer, or all layers in the layer-wise modes.
    #[serde(default)]
    pub layers: Option<LayerSelection>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub probe: ProbeOverrides,
}

impl ExperimentSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, RunnerError> {
        let spec: Self = serde_json::from_reader(File::open(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let invalid = |m: &str| Err(RunnerError::InvalidSpec(m.to_string()));
        if self.tasks.is_empty() {
            return invalid("at least one task is required");
        }
        if self.encoders.is_empty() {
            return invalid("at least one encoder is required");
        }
        if self.seeds.is_empty() {
            return invalid("at least one seed is required");
        }
        let unique = |names: Vec<&str>| names.iter().collect::<HashSet<_>>().len() == names.len();
        if !unique(self.tasks.iter().map(|t| t.name.as_str()).collect()) {
            return invalid("task names must be unique");
        }
        if !unique(self.encoders.iter().map(|e| e.name.as_str()).collect()) {
            return invalid("encoder names must be unique");
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return invalid("seeds must be unique");
        }
        if let Some(LayerSelection::Explicit(layers)) = &self.layers {
            if layers.is_empty() || layers.contains(&0) {
                return invalid("explicit layers must be a non-empty list of 1-based indices");
            }
        }
        self.split.validate().map_err(|e| RunnerError::InvalidSpec(e.to_string()))?;
        Ok(())
    }

    pub fn layer_selection(&self) -> LayerSelection {
        self.layers.clone().unwrap_or(LayerSelection::Keyword(if self.mode.is_layerwise() {
            LayerKeyword::All
        } else {
            LayerKeyword::Last
        }))
    }

    /// File holding the embeddings of `task` produced by `encoder`.
    pub fn data_path(&self, task: &TaskSpec, encoder: &EncoderSpec) -> Result<PathBuf, RunnerError> {
        let template = encoder.path.as_ref().or(task.path.as_ref()).ok_or_else(|| {
            RunnerError::InvalidSpec(format!("no path for task {:?} with encoder {:?}", task.name, encoder.name))
        })?;
        Ok(PathBuf::from(template.replace("{task}", &task.name).replace("{encoder}", &encoder.name)))
    }

    pub fn probe_config(&self, dim: usize, num_classes: usize, seed: u64) -> ProbeConfig {
        self.probe.apply(ProbeConfig::new(dim, num_classes)).with_seed(seed)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for the journal and final result files; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    /// Reuse cells already recorded in an existing journal.
    pub resume: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub task: usize,
    pub encoder: usize,
    pub layer: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub task: String,
    pub encoder: String,
    pub layer: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunResult>,
    pub aggregates: Vec<AggregateResult>,
    pub failures: Vec<CellFailure>,
}

/// Split embeddings of one (task, encoder) pair.
struct PreparedData {
    train: EmbeddingDataset,
    val: EmbeddingDataset,
    test: EmbeddingDataset,
}

/// Split data keyed by (task index, encoder index).
type PreparedGrid = HashMap<(usize, usize), PreparedData>;

fn prepare(spec: &ExperimentSpec) -> Result<(PreparedGrid, Vec<CellKey>), RunnerError> {
    let selection = spec.layer_selection();
    let mut prepared = HashMap::new();
    let mut cells = Vec::new();
    for (ti, task) in spec.tasks.iter().enumerate() {
        let mut reference: Option<(String, Vec<String>)> = None;
        for (ei, encoder) in spec.encoders.iter().enumerate() {
            let data_error =
                |source| RunnerError::Data { task: task.name.clone(), encoder: encoder.name.clone(), source };
            let path = spec.data_path(task, encoder)?;
            let dataset = read_dataset(&path).map_err(|e| match e {
                StoreError::Io(io) => {
                    data_error(StoreError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))))
                }
                other => data_error(other),
            })?;
            let names = dataset.schema().class_names().to_vec();
            match &reference {
                Some((first, expected)) if *expected != names => {
                    return Err(RunnerError::SchemaMismatch {
                        task: task.name.clone(),
                        encoder: encoder.name.clone(),
                        message: format!("classes {names:?} differ from {expected:?} declared by encoder {first:?}"),
                    });
                }
                Some(_) => {}
                None => reference = Some((encoder.name.clone(), names)),
            }
            let layers = selection.resolve(dataset.num_layers());
            if let Some(&bad) = layers.iter().find(|&&l| l == 0 || l > dataset.num_layers()) {
                return Err(RunnerError::LayerOutOfRange {
                    task: task.name.clone(),
                    encoder: encoder.name.clone(),
                    layer: bad,
                    num_layers: dataset.num_layers(),
                });
            }
            let (train, val, test) = split_dataset(&dataset, &spec.split).map_err(data_error)?;
            prepared.insert((ti, ei), PreparedData { train, val, test });
            for &layer in &layers {
                for &seed in &spec.seeds {
                    cells.push(CellKey { task: ti, encoder: ei, layer, seed });
                }
            }
        }
    }
    Ok((prepared, cells))
}

fn run_cell(spec: &ExperimentSpec, data: &PreparedData, cell: &CellKey) -> Result<Vec<(Metric, f64)>, String> {
    let layer = cell.layer - 1;
    let train = ProbeSet::from_dataset(&data.train, layer).map_err(|e| e.to_string())?;
    let config = spec.probe_config(train.dim(), train.num_classes, cell.seed);
    if spec.mode.is_mdl() {
        let schedule = build_schedule(train.len(), train.num_classes, &DEFAULT_FRACTIONS).map_err(|e| e.to_string())?;
        let report = online_codelength(&train, &config, &schedule).map_err(|e| e.to_string())?;
        Ok(vec![(Metric::MdlBits, report.total_bits), (Metric::Compression, report.compression)])
    } else {
        let val = ProbeSet::from_dataset(&data.val, layer).map_err(|e| e.to_string())?;
        let test = ProbeSet::from_dataset(&data.test, layer).map_err(|e| e.to_string())?;
        let (net, _) = train_probe(&train, &val, &config).map_err(|e| e.to_string())?;
        let eval = evaluate(&net, &test, Averaging::Macro).map_err(|e| e.to_string())?;
        Ok(vec![(Metric::F1Macro, eval.f1), (Metric::Accuracy, eval.accuracy)])
    }
}

fn metric_rank(metric: Metric) -> u8 {
    match metric {
        Metric::F1Macro => 0,
        Metric::Accuracy => 1,
        Metric::MdlBits => 2,
        Metric::Compression => 3,
    }
}

/// Cells recorded in the journal with every metric of the current mode.
fn load_journal(spec: &ExperimentSpec, path: &Path) -> Result<HashMap<CellKey, Vec<RunResult>>, RunnerError> {
    let mut done: HashMap<CellKey, Vec<RunResult>> = HashMap::new();
    if !path.exists() {
        return Ok(done);
    }
    let task_index: HashMap<&str, usize> = spec.tasks.iter().enumerate().map(|(i, t)| (t.name.as_str(), i)).collect();
    let encoder_index: HashMap<&str, usize> =
        spec.encoders.iter().enumerate().map(|(i, e)| (e.name.as_str(), i)).collect();
    for run in read_runs_file(path)? {
        if run.experiment != spec.name {
            continue;
        }
        let (Some(&task), Some(&encoder)) =
            (task_index.get(run.task.as_str()), encoder_index.get(run.encoder.as_str()))
        else {
            continue;
        };
        done.entry(CellKey { task, encoder, layer: run.layer, seed: run.seed }).or_default().push(run);
    }
    let wanted = spec.mode.metrics();
    done.retain(|_, runs| wanted.iter().all(|m| runs.iter().any(|r| r.metric == *m)));
    Ok(done)
}

/// Runs every cell of the grid and aggregates over seeds.
pub fn run_experiment(spec: &ExperimentSpec, options: &RunOptions) -> Result<ExperimentOutcome, RunnerError> {
    spec.validate()?;
    let (prepared, cells) = prepare(spec)?;

    let journal_path = options.out_dir.as_ref().map(|d| d.join(JOURNAL_FILE));
    let mut completed = HashMap::new();
    if let Some(path) = &journal_path {
        fs::create_dir_all(path.parent().expect("journal lives in a directory"))?;
        if options.resume {
            completed = load_journal(spec, path)?;
        } else if path.exists() {
            fs::remove_file(path)?;
        }
    }
    let journal = match &journal_path {
        Some(path) => {
            let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
            let file = OpenOptions::new().create(true).append(true).open(path)?;
            let mut writer = csv::WriterBuilder::new().has_headers(fresh).from_writer(BufWriter::new(file));
            if fresh {
                writer.write_record(["experiment", "task", "encoder", "layer", "seed", "metric", "value"])?;
                writer.flush()?;
            }
            Some(Mutex::new(writer))
        }
        None => None,
    };

    let pending: Vec<&CellKey> = cells.iter().filter(|c| !completed.contains_key(*c)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.unwrap_or(0))
        .build()
        .map_err(|e| RunnerError::Pool(e.to_string()))?;

    let outcomes: Vec<(CellKey, Result<Vec<RunResult>, String>)> = pool.install(|| {
        pending
            .par_iter()
            .map(|cell| {
                let data = &prepared[&(cell.task, cell.encoder)];
                let result = run_cell(spec, data, cell).map(|values| {
                    values
                        .into_iter()
                        .map(|(metric, value)| RunResult {
                            experiment: spec.name.clone(),
                            task: spec.tasks[cell.task].name.clone(),
                            encoder: spec.encoders[cell.encoder].name.clone(),
                            layer: cell.layer,
                            seed: cell.seed,
                            metric,
                            value,
                        })
                        .collect::<Vec<_>>()
                });
                if let (Some(journal), Ok(runs)) = (&journal, &result) {
                    let mut writer = journal.lock().expect("journal lock");
                    let written: Result<(), csv::Error> =
                        runs.iter().try_for_each(|r| writer.serialize(r)).and_then(|_| Ok(writer.flush()?));
                    if let Err(e) = written {
                        return ((*cell).clone(), Err(format!("journal write failed: {e}")));
                    }
                }
                ((*cell).clone(), result)
            })
            .collect()
    });
    drop(journal);

    let mut finished: Vec<(CellKey, Vec<RunResult>)> = completed.into_iter().collect();
    let mut failures = Vec::new();
    for (cell, result) in outcomes {
        match result {
            Ok(runs) => finished.push((cell, runs)),
            Err(message) => failures.push(CellFailure {
                task: spec.tasks[cell.task].name.clone(),
                encoder: spec.encoders[cell.encoder].name.clone(),
                layer: cell.layer,
                seed: cell.seed,
                message,
            }),
        }
    }
    finished.sort_by(|a, b| a.0.cmp(&b.0));
    let runs: Vec<RunResult> = finished
        .into_iter()
        .flat_map(|(_, mut runs)| {
            runs.sort_by_key(|r| metric_rank(r.metric));
            runs
        })
        .collect();
    let aggregates = aggregate(&runs);

    if let Some(dir) = &options.out_dir {
        if failures.is_empty() {
            write_final_results(dir, &runs, &aggregates)?;
            if let Some(path) = &journal_path {
                fs::remove_file(path)?;
            }
        }
    }
    Ok(ExperimentOutcome { runs, aggregates, failures })
}

fn write_final_results(dir: &Path, runs: &[RunResult], aggregates: &[AggregateResult]) -> Result<(), RunnerError> {
    let mut runs_out = BufWriter::new(File::create(dir.join(RUNS_FILE))?);
    write_runs_csv(runs, &mut runs_out)?;
    runs_out.flush()?;
    let mut agg_out = BufWriter::new(File::create(dir.join(AGGREGATES_FILE))?);
    serde_json::to_writer_pretty(&mut agg_out, aggregates)?;
    agg_out.write_all(b"\n")?;
    agg_out.flush()?;
    Ok(())
}
