// Train one classifier probe on synthetic embeddings and compare its test
// accuracy with the Bayes-optimal accuracy of the generator.

use socioprobe::embstore::{split_dataset, SplitSpec};
use socioprobe::probecore::{evaluate, train_probe, Averaging, ProbeConfig, ProbeSet};
use socioprobe::synthgen::{bayes_accuracy, generate, SynthSpec};

pub struct ClassicOutcome {
    pub f1: f64,
    pub accuracy: f64,
    pub bayes: f64,
    pub epochs: usize,
}

pub fn run_example(n: usize, delta: f64, hidden_dim: usize) -> Result<ClassicOutcome, Box<dyn std::error::Error>> {
    let data = generate(&SynthSpec::binary(n, 16, delta, 11))?;
    let (train, val, test) = split_dataset(&data, &SplitSpec::default())?;
    let [train, val, test] = [&train, &val, &test].map(|ds| ProbeSet::from_dataset(ds, 0));
    let (train, val, test) = (train?, val?, test?);

    let config = ProbeConfig::new(train.dim(), train.num_classes).with_hidden_dim(hidden_dim).with_seed(0);
    let (probe, report) = train_probe(&train, &val, &config)?;
    let eval = evaluate(&probe, &test, Averaging::Macro)?;

    let outcome = ClassicOutcome {
        f1: eval.f1,
        accuracy: eval.accuracy,
        bayes: bayes_accuracy(delta),
        epochs: report.epochs_run,
    };
    println!(
        "delta {delta}: macro-F1 {:.4}, accuracy {:.4} (Bayes {:.4}) after {} epochs, best validation loss {:.4}",
        outcome.f1,
        outcome.accuracy,
        outcome.bayes,
        outcome.epochs,
        report.best_val_loss.unwrap_or(f64::NAN)
    );
    Ok(outcome)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    for delta in [0.0, 1.0, 3.0, 6.0] {
        run_example(2000, delta, 64)?;
    }
    Ok(())
}
