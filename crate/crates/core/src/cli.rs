//! The `socioprobe` command line.
//!
//! Exit codes: 0 on success, 1 when any experiment cell failed or a file
//! failed validation, 2 on usage errors (bad flags, unreadable inputs).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::costmodel::{
    cost_estimate, cost_estimate_with_runs, gain_table, parse_budget, read_size_scores, render_table, CostModelParams,
    DollarRounding, GainRow, TableFormat,
};
use crate::embstore::{read_dataset, write_dataset, StoreError};
use crate::runner::{
    aggregate, compare_encoders, emit_report, read_runs_file, run_experiment, EncoderSpec, ExperimentSpec,
    LayerKeyword, LayerSelection, ProbeMode, ProbeOverrides, ReportFormat, RunOptions, TaskSpec, RUNS_FILE,
};
use crate::synthgen::{bayes_accuracy, generate, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Overrides the default output directory of the probing subcommands.
pub const RESULTS_DIR_ENV: &str = "SOCIOPROBE_RESULTS_DIR";
pub const DEFAULT_RESULTS_DIR: &str = "socioprobe-results";

#[derive(Debug, Parser)]
#[command(name = "socioprobe", version, about = "Probe per-layer sentence embeddings for label knowledge")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train classifier probes on the last (or selected) layer and report test F1.
    ProbeClassic(ProbeArgs),
    /// Compute online-code description lengths on the last (or selected) layer.
    ProbeMdl(ProbeArgs),
    /// Probe every layer (or the selected ones) and chart the results per task.
    ProbeLayers(LayerArgs),
    /// Print pretraining cost, CO2 and expected F1 gain per word budget.
    Cost(CostArgs),
    /// Mean F1 gain between consecutive pretraining sizes or encoders.
    Gains(GainsArgs),
    /// Write a synthetic embedding file with known class separation per layer.
    Synth(SynthArgs),
    /// Re-render aggregates and charts from a persisted runs.csv.
    Report(ReportArgs),
    /// Check an embedding file and print its shape and label summary.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProbeArgs {
    /// Experiment spec (JSON). Other flags override its settings.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Embedding file as PATH or TASK=PATH; repeat for several tasks.
    #[arg(long, value_name = "PATH")]
    pub data: Vec<String>,
    /// Encoder name recorded with the results of --data files.
    #[arg(long, default_value = "encoder")]
    pub encoder: String,
    /// Experiment name recorded in runs.csv.
    #[arg(long)]
    pub name: Option<String>,
    /// Layers to probe: last, all, or a comma list of 1-based indices.
    #[arg(long, value_parser = parse_layers)]
    pub layers: Option<LayerSelection>,
    /// Probe seeds, comma separated [default: 0,1,2,3,4].
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Hidden units of the probe [default: 256].
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Epoch limit of each probe [default: 50].
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Output directory [default: $SOCIOPROBE_RESULTS_DIR or ./socioprobe-results].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads [default: available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Ignore an existing journal instead of resuming from it.
    #[arg(long)]
    pub fresh: bool,
    /// Report files to write, comma separated; runs.csv and aggregates.json
    /// are written regardless so that runs can be resumed and re-rendered.
    #[arg(long, value_delimiter = ',', default_value = "csv,json,svg")]
    pub format: Vec<FormatArg>,
}

#[derive(Debug, Clone, Args)]
pub struct LayerArgs {
    #[command(flatten)]
    pub probe: ProbeArgs,
    /// Measure description length instead of classifier F1.
    #[arg(long)]
    pub mdl: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
    Svg,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Svg => ReportFormat::Svg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableArg {
    Text,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct CostArgs {
    /// Word budgets such as 1M,10M,100M,1B,30B.
    #[arg(long, value_delimiter = ',', default_value = "1M,10M,100M,1B,30B")]
    pub tokens: Vec<String>,
    /// Run multiplier for budgets without a built-in one.
    #[arg(long)]
    pub runs: Option<f64>,
    /// CSV with columns size,task,f1 (percent) used for the gain column.
    #[arg(long, value_name = "FILE")]
    pub f1: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TableArg,
    /// Use a whole-dollar rate per billion words and whole-dollar run costs.
    #[arg(long)]
    pub whole_dollars: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GainsArgs {
    /// CSV with columns size,task,f1 (percent).
    #[arg(long, value_name = "FILE", conflicts_with = "results", required_unless_present = "results")]
    pub f1: Option<PathBuf>,
    /// runs.csv (or its directory) from a classic probing run.
    #[arg(long, value_name = "PATH", requires = "order")]
    pub results: Option<PathBuf>,
    /// Encoders from smallest to largest, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub order: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2048)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Class-center separation per layer in noise std units; one value per layer.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub delta: Vec<f64>,
    /// Share of dimensions that carry only noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (.speb, or .jsonl for the text format).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// runs.csv or the directory holding it.
    #[arg(long, value_name = "PATH")]
    pub results: PathBuf,
    /// Output directory [default: the results directory].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "json,svg")]
    pub format: Vec<FormatArg>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Embedding file (.speb, .jsonl or .ndjson).
    pub file: PathBuf,
}

fn parse_layers(text: &str) -> Result<LayerSelection, String> {
    match text {
        "last" => Ok(LayerSelection::Keyword(LayerKeyword::Last)),
        "all" => Ok(LayerSelection::Keyword(LayerKeyword::All)),
        list => {
            let layers = list
                .split(',')
                .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            if layers.contains(&0) {
                return Err("layers are 1-based".into());
            }
            Ok(LayerSelection::Explicit(layers))
        }
    }
}

enum Failure {
    Usage(String),
    Failed(String),
}

type Outcome = Result<i32, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::ProbeClassic(a) => probe(a, ProbeMode::Classic, out, err),
        Command::ProbeMdl(a) => probe(a, ProbeMode::Mdl, out, err),
        Command::ProbeLayers(a) => {
            let mode = if a.mdl { ProbeMode::LayerwiseMdl } else { ProbeMode::LayerwiseClassic };
            probe(a.probe, mode, out, err)
        }
        Command::Cost(a) => cost(a, out),
        Command::Gains(a) => gains(a, out),
        Command::Synth(a) => synth(a, out),
        Command::Report(a) => report(a, out),
        Command::Validate(a) => validate(a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(message)) => {
            let _ = writeln!(err, "error: {message}");
            let _ = writeln!(err, "run `socioprobe <subcommand> --help` for usage");
            EXIT_USAGE
        }
        Err(Failure::Failed(message)) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_FAILED
        }
    }
}

pub fn main() -> std::process::ExitCode {
    let code = run(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::ExitCode::from(code as u8)
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(RESULTS_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_RESULTS_DIR))
}

fn task_from_data(arg: &str) -> TaskSpec {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() => TaskSpec { name: name.to_string(), path: Some(path.to_string()) },
        _ => {
            let name = Path::new(arg).file_stem().map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
            TaskSpec { name, path: Some(arg.to_string()) }
        }
    }
}

fn assemble_spec(args: &ProbeArgs, mode: ProbeMode) -> Result<ExperimentSpec, Failure> {
    let mut spec = match (&args.spec, args.data.is_empty()) {
        (Some(_), false) => return Err(usage("--spec and --data cannot be combined")),
        (None, true) => return Err(usage("either --spec or --data is required")),
        (Some(path), true) => {
            ExperimentSpec::from_json_file(path).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        (None, false) => {
            for data in &args.data {
                let path = task_from_data(data).path.expect("flag tasks carry a path");
                if !Path::new(&path).is_file() {
                    return Err(usage(format!("--data {path}: no such file")));
                }
            }
            ExperimentSpec {
                name: String::new(),
                tasks: args.data.iter().map(|d| task_from_data(d)).collect(),
                encoders: vec![EncoderSpec { name: args.encoder.clone(), path: None }],
                mode,
                layers: None,
                seeds: vec![0, 1, 2, 3, 4],
                split: Default::default(),
                probe: ProbeOverrides::default(),
            }
        }
    };
    spec.mode = mode;
    if let Some(name) = &args.name {
        spec.name = name.clone();
    }
    if spec.name.is_empty() {
        spec.name = match mode {
            ProbeMode::Classic => "probe-classic",
            ProbeMode::Mdl => "probe-mdl",
            ProbeMode::LayerwiseClassic => "probe-layers",
            ProbeMode::LayerwiseMdl => "probe-layers-mdl",
        }
        .to_string();
    }
    if let Some(layers) = &args.layers {
        spec.layers = Some(layers.clone());
    }
    if !args.seeds.is_empty() {
        spec.seeds = args.seeds.clone();
    }
    if args.hidden_dim.is_some() {
        spec.probe.hidden_dim = args.hidden_dim;
    }
    if args.max_epochs.is_some() {
        spec.probe.max_epochs = args.max_epochs;
    }
    spec.validate().map_err(usage)?;
    Ok(spec)
}

fn probe(args: ProbeArgs, mode: ProbeMode, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let spec = assemble_spec(&args, mode)?;
    let out_dir = args.out.clone().unwrap_or_else(default_out_dir);
    let options = RunOptions { out_dir: Some(out_dir.clone()), workers: args.workers, resume: !args.fresh };
    let outcome = run_experiment(&spec, &options).map_err(usage)?;

    let _ = writeln!(
        out,
        "{:<16} {:<16} {:>5} {:<12} {:>12} {:>10} {:>5}",
        "task", "encoder", "layer", "metric", "mean", "std", "n"
    );
    for a in &outcome.aggregates {
        let _ = writeln!(
            out,
            "{:<16} {:<16} {:>5} {:<12} {:>12.4} {:>10.4} {:>5}",
            a.task, a.encoder, a.layer, a.metric, a.mean, a.std, a.n_seeds
        );
    }
    for f in &outcome.failures {
        let _ = writeln!(
            err,
            "cell failed: task {} encoder {} layer {} seed {}: {}",
            f.task, f.encoder, f.layer, f.seed, f.message
        );
    }
    if !outcome.failures.is_empty() {
        let _ = writeln!(
            err,
            "{} cell(s) failed; completed cells are kept in {} for resuming",
            outcome.failures.len(),
            out_dir.display()
        );
        return Ok(EXIT_FAILED);
    }
    let formats: Vec<ReportFormat> = args.format.iter().map(|&f| f.into()).collect();
    let written = emit_report(&outcome.runs, &outcome.aggregates, &formats, &out_dir)
        .map_err(|e| Failure::Failed(e.to_string()))?;
    let _ = writeln!(out, "wrote {} file(s) to {}", written.len(), out_dir.display());
    Ok(EXIT_OK)
}

fn cost(args: CostArgs, out: &mut dyn Write) -> Outcome {
    let mut params = CostModelParams::default();
    if args.whole_dollars {
        params.rounding = DollarRounding::WholeDollars;
    }
    let mut estimates = Vec::with_capacity(args.tokens.len());
    for text in &args.tokens {
        let tokens = parse_budget(text).ok_or_else(|| usage(format!("--tokens: cannot parse {text:?}")))?;
        let estimate = match (cost_estimate(tokens, &params), args.runs) {
            (Ok(e), _) => e,
            (Err(_), Some(runs)) => cost_estimate_with_runs(tokens, runs, &params).map_err(usage)?,
            (Err(e), None) => return Err(usage(format!("{e}; pass --runs"))),
        };
        estimates.push(estimate);
    }
    let gains = match &args.f1 {
        Some(path) => size_gains(path)?,
        None => Vec::new(),
    };
    let format = match args.format {
        TableArg::Text => TableFormat::Text,
        TableArg::Csv => TableFormat::Csv,
    };
    let _ = write!(out, "{}", render_table(&estimates, &gains, format));
    Ok(EXIT_OK)
}

fn size_gains(path: &Path) -> Result<Vec<GainRow>, Failure> {
    let file = std::fs::File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let sizes = read_size_scores(file).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    gain_table(&sizes).map_err(usage)
}

fn runs_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(RUNS_FILE)
    } else {
        path.to_path_buf()
    }
}

fn gains(args: GainsArgs, out: &mut dyn Write) -> Outcome {
    let rows = match (&args.f1, &args.results) {
        (Some(path), _) => size_gains(path)?,
        (None, Some(path)) => {
            let path = runs_path(path);
            let runs = read_runs_file(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let order: Vec<&str> = args.order.iter().map(String::as_str).collect();
            compare_encoders(&aggregate(&runs), &order).map_err(usage)?
        }
        (None, None) => return Err(usage("either --f1 or --results is required")),
    };
    let _ = writeln!(out, "{:<16} {:>8}", "size", "gain");
    for row in rows {
        let gain = row.gain.map_or_else(|| "--".to_string(), |g| format!("{g:+.2}"));
        let _ = writeln!(out, "{:<16} {:>8}", row.label, gain);
    }
    Ok(EXIT_OK)
}

fn synth(args: SynthArgs, out: &mut dyn Write) -> Outcome {
    let spec = SynthSpec {
        n: args.n,
        dim: args.dim,
        num_classes: args.classes,
        layer_separations: args.delta.clone(),
        noise_fraction: args.noise_fraction,
        seed: args.seed,
    };
    let dataset = generate(&spec).map_err(usage)?;
    write_dataset(&dataset, &args.out).map_err(|e| usage(format!("{}: {e}", args.out.display())))?;
    let _ = writeln!(
        out,
        "wrote {} records, {} layers of dim {}, {} classes to {}",
        dataset.len(),
        dataset.num_layers(),
        dataset.dim(),
        dataset.num_classes(),
        args.out.display()
    );
    if spec.num_classes == 2 {
        for (l, delta) in spec.layer_separations.iter().enumerate() {
            let _ = writeln!(out, "layer {}: delta {delta}, Bayes accuracy {:.4}", l + 1, bayes_accuracy(*delta));
        }
    }
    Ok(EXIT_OK)
}

fn report(args: ReportArgs, out: &mut dyn Write) -> Outcome {
    let path = runs_path(&args.results);
    let runs = read_runs_file(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if runs.is_empty() {
        return Err(usage(format!("{}: no results", path.display())));
    }
    let out_dir = args.out.unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
    let formats: Vec<ReportFormat> = args.format.iter().map(|&f| f.into()).collect();
    let written =
        emit_report(&runs, &aggregate(&runs), &formats, &out_dir).map_err(|e| Failure::Failed(e.to_string()))?;
    for file in &written {
        let _ = writeln!(out, "{}", file.display());
    }
    Ok(EXIT_OK)
}

fn validate(args: ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let dataset = match read_dataset(&args.file) {
        Ok(ds) => ds,
        Err(StoreError::Io(e)) => return Err(usage(format!("{}: {e}", args.file.display()))),
        Err(e) => {
            let _ = writeln!(err, "{}: invalid: {e}", args.file.display());
            return Ok(EXIT_FAILED);
        }
    };
    let names = dataset.schema().class_names();
    let counts = dataset.class_counts();
    let _ = writeln!(out, "file: {}", args.file.display());
    let _ = writeln!(out, "n: {}", dataset.len());
    let _ = writeln!(out, "L: {}", dataset.num_layers());
    let _ = writeln!(out, "d: {}", dataset.dim());
    let _ = writeln!(out, "K: {}", dataset.num_classes());
    let _ = writeln!(out, "labels: {}", names.join(", "));
    let listed: Vec<String> = names.iter().zip(&counts).map(|(n, c)| format!("{n}={c}")).collect();
    let _ = writeln!(out, "class counts: {}", listed.join(", "));
    Ok(EXIT_OK)
}
