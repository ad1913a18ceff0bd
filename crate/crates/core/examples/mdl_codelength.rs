// Online-code description length of labels given embeddings, for an
// uninformative and an informative synthetic set.

use socioprobe::mdl::{build_schedule, online_codelength, CodelengthReport, DEFAULT_FRACTIONS};
use socioprobe::probecore::{ProbeConfig, ProbeSet};
use socioprobe::synthgen::{generate, SynthSpec};

pub fn run_example(n: usize, delta: f64, hidden_dim: usize) -> Result<CodelengthReport, Box<dyn std::error::Error>> {
    let data = generate(&SynthSpec::binary(n, 16, delta, 5))?;
    let set = ProbeSet::from_dataset(&data, 0)?;
    let schedule = build_schedule(set.len(), set.num_classes, &DEFAULT_FRACTIONS)?;
    let config = ProbeConfig::new(set.dim(), set.num_classes).with_hidden_dim(hidden_dim).with_seed(0);
    let report = online_codelength(&set, &config, &schedule)?;

    println!("delta {delta}: portion ends {:?}", schedule.boundaries);
    println!(
        "  first block {:.1} bits, blocks {:?}",
        report.uniform_bits,
        report.block_bits.iter().map(|b| format!("{b:.1}")).collect::<Vec<_>>()
    );
    println!("  total {:.1} bits, compression {:.3}", report.total_bits, report.compression);
    Ok(report)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example(2048, 0.0, 64)?;
    run_example(2048, 3.0, 64)?;
    Ok(())
}
