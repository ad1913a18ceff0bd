// Layer-wise probing: only layer 3 of a six-layer synthetic encoder carries
// label information, and the sweep finds it. Writes per-layer charts.

use socioprobe::embstore::write_dataset;
use socioprobe::runner::{
    emit_report, run_experiment, AggregateResult, EncoderSpec, ExperimentSpec, Metric, ProbeMode, ProbeOverrides,
    ReportFormat, RunOptions, TaskSpec,
};
use socioprobe::synthgen::{generate, SynthSpec};

pub fn run_example(dir: &std::path::Path, n: usize, seeds: Vec<u64>) -> Result<usize, Box<dyn std::error::Error>> {
    let spec = SynthSpec {
        n,
        dim: 16,
        num_classes: 2,
        layer_separations: vec![0.0, 0.0, 3.0, 0.0, 0.0, 0.0],
        noise_fraction: 0.25,
        seed: 3,
    };
    let path = dir.join("layered.speb");
    write_dataset(&generate(&spec)?, &path)?;

    let experiment = ExperimentSpec {
        name: "layer-sweep".into(),
        tasks: vec![TaskSpec { name: "synthetic".into(), path: Some(path.display().to_string()) }],
        encoders: vec![EncoderSpec { name: "toy-6l".into(), path: None }],
        mode: ProbeMode::LayerwiseClassic,
        layers: None,
        seeds,
        split: Default::default(),
        probe: ProbeOverrides { hidden_dim: Some(32), ..Default::default() },
    };
    let out_dir = dir.join("layer-sweep");
    let outcome = run_experiment(&experiment, &RunOptions { out_dir: Some(out_dir.clone()), ..Default::default() })?;
    let files = emit_report(&outcome.runs, &outcome.aggregates, &[ReportFormat::Svg], &out_dir)?;

    let f1: Vec<&AggregateResult> = outcome.aggregates.iter().filter(|a| a.metric == Metric::F1Macro).collect();
    for a in &f1 {
        println!("layer {}: macro-F1 {:.3} ± {:.3}", a.layer, a.mean, a.std);
    }
    let best = f1.iter().max_by(|a, b| a.mean.total_cmp(&b.mean)).expect("six layers probed").layer;
    println!("most informative layer: {best}; charts: {files:?}");
    Ok(best)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("socioprobe-layer-example");
    std::fs::create_dir_all(&dir)?;
    run_example(&dir, 2048, vec![0, 1, 2, 3, 4])?;
    Ok(())
}
