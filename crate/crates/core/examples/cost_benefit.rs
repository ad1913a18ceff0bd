// Pretraining cost and emissions per word budget next to the F1 gained
// from one budget to the next.

use std::collections::BTreeMap;

use socioprobe::costmodel::{cost_estimate, gain_table, render_table, CostModelParams, SizeScores, TableFormat};

pub fn run_example() -> Result<String, Box<dyn std::error::Error>> {
    let params = CostModelParams::default();
    let budgets = [1_000_000u64, 10_000_000, 100_000_000, 1_000_000_000, 30_000_000_000];
    let estimates = budgets.iter().map(|&t| cost_estimate(t, &params)).collect::<Result<Vec<_>, _>>()?;

    // Mean F1 (percent) of two tasks per budget, e.g. from `socioprobe probe-classic` runs.
    let f1 = [
        ("1M", [61.0, 58.2]),
        ("10M", [63.1, 61.3]),
        ("100M", [65.5, 62.9]),
        ("1B", [65.7, 63.3]),
        ("30B", [74.9, 71.2]),
    ];
    let sizes: Vec<SizeScores> = f1
        .iter()
        .map(|(label, [a, b])| SizeScores {
            label: label.to_string(),
            scores: BTreeMap::from([("gender".to_string(), vec![*a]), ("age".to_string(), vec![*b])]),
        })
        .collect();
    let gains = gain_table(&sizes)?;
    let table = render_table(&estimates, &gains, TableFormat::Text);
    print!("{table}");
    Ok(table)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
