// Compare encoders of increasing "size" on two tasks with both probing
// methods, then compute the mean F1 gain from each encoder to the next.

use socioprobe::costmodel::GainRow;
use socioprobe::embstore::write_dataset;
use socioprobe::runner::{
    compare_encoders, run_experiment, EncoderSpec, ExperimentSpec, Metric, ProbeMode, ProbeOverrides, RunOptions,
    TaskSpec,
};
use socioprobe::synthgen::{generate, SynthSpec};

pub fn run_example(dir: &std::path::Path, n: usize) -> Result<Vec<GainRow>, Box<dyn std::error::Error>> {
    // Larger encoders separate the classes further.
    let encoders = [("small", 0.5), ("medium", 1.5), ("large", 3.0)];
    for (task, seed) in [("gender", 1u64), ("age", 2)] {
        for (encoder, delta) in encoders {
            let data = generate(&SynthSpec::binary(n, 12, delta, seed))?;
            write_dataset(&data, dir.join(format!("{encoder}-{task}.speb")))?;
        }
    }
    let template = dir.join("{encoder}-{task}.speb").display().to_string();
    let mut experiment = ExperimentSpec {
        name: "encoder-comparison".into(),
        tasks: vec![
            TaskSpec { name: "gender".into(), path: Some(template.clone()) },
            TaskSpec { name: "age".into(), path: Some(template) },
        ],
        encoders: encoders.iter().map(|(name, _)| EncoderSpec { name: name.to_string(), path: None }).collect(),
        mode: ProbeMode::Classic,
        layers: None,
        seeds: vec![0, 1, 2],
        split: Default::default(),
        probe: ProbeOverrides { hidden_dim: Some(32), ..Default::default() },
    };
    let classic = run_experiment(&experiment, &RunOptions::default())?;
    experiment.mode = ProbeMode::Mdl;
    let mdl = run_experiment(&experiment, &RunOptions::default())?;

    for (encoder, _) in encoders {
        let mean_of = |aggs: &[socioprobe::runner::AggregateResult], metric| {
            let values: Vec<f64> =
                aggs.iter().filter(|a| a.encoder == encoder && a.metric == metric).map(|a| a.mean).collect();
            values.iter().sum::<f64>() / values.len() as f64
        };
        println!(
            "{encoder:>6}: mean macro-F1 {:.3}, mean codelength {:.0} bits",
            mean_of(&classic.aggregates, Metric::F1Macro),
            mean_of(&mdl.aggregates, Metric::MdlBits)
        );
    }
    let order: Vec<&str> = encoders.iter().map(|(name, _)| *name).collect();
    let gains = compare_encoders(&classic.aggregates, &order)?;
    for row in &gains {
        println!("{:>6}: {}", row.label, row.gain.map_or("--".into(), |g| format!("{g:+.2} F1 points")));
    }
    Ok(gains)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("socioprobe-encoder-example");
    std::fs::create_dir_all(&dir)?;
    run_example(&dir, 1500)?;
    Ok(())
}
