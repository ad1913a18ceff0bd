use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::{ProbeError, ProbeNetwork, ProbeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// Unweighted mean of per-class F1 over classes present in gold or predictions.
    #[default]
    Macro,
    /// F1 from pooled counts; equals accuracy for single-label data.
    Micro,
    /// F1 of class index 1.
    BinaryPositive,
}

/// `counts[gold][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self { counts: vec![vec![0; num_classes]; num_classes] }
    }

    pub fn from_labels(gold: &[usize], predicted: &[usize], num_classes: usize) -> Result<Self, ProbeError> {
        if gold.len() != predicted.len() {
            return Err(ProbeError::Shape(format!("{} gold labels but {} predictions", gold.len(), predicted.len())));
        }
        let mut m = Self::new(num_classes);
        for (&g, &p) in gold.iter().zip(predicted) {
            if g >= num_classes || p >= num_classes {
                return Err(ProbeError::Shape(format!("label pair ({g}, {p}) out of range for K={num_classes}")));
            }
            m.counts[g][p] += 1;
        }
        Ok(m)
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, gold: usize, predicted: usize) -> usize {
        self.counts[gold][predicted]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.num_classes()).map(|c| self.counts[c][c]).sum()
    }

    fn gold_total(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    fn predicted_total(&self, class: usize) -> usize {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// F1 of one class, 0 when it has neither gold nor predicted members.
    pub fn class_f1(&self, class: usize) -> f64 {
        let tp = self.counts[class][class] as f64;
        let denom = (self.gold_total(class) + self.predicted_total(class)) as f64;
        if denom == 0.0 {
            0.0
        } else {
            2.0 * tp / denom
        }
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    pub fn f1(&self, averaging: Averaging) -> f64 {
        match averaging {
            Averaging::Macro => {
                let present: Vec<usize> =
                    (0..self.num_classes()).filter(|&c| self.gold_total(c) + self.predicted_total(c) > 0).collect();
                if present.is_empty() {
                    return 0.0;
                }
                present.iter().map(|&c| self.class_f1(c)).sum::<f64>() / present.len() as f64
            }
            Averaging::Micro => self.accuracy(),
            Averaging::BinaryPositive => self.class_f1(1),
        }
    }
}

pub fn f1_score(
    gold: &[usize],
    predicted: &[usize],
    num_classes: usize,
    averaging: Averaging,
) -> Result<f64, ProbeError> {
    if gold.is_empty() {
        return Err(ProbeError::Empty("label list"));
    }
    Ok(ConfusionMatrix::from_labels(gold, predicted, num_classes)?.f1(averaging))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub f1: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Argmax predictions of `net` on `test` scored with the chosen F1 averaging.
/// Ties go to the lowest class index.
pub fn evaluate(net: &ProbeNetwork, test: &ProbeSet, averaging: Averaging) -> Result<Evaluation, ProbeError> {
    if test.is_empty() {
        return Err(ProbeError::Empty("test set"));
    }
    if test.num_classes != net.num_classes() {
        return Err(ProbeError::Shape(format!(
            "test set has K={} but the probe has K={}",
            test.num_classes,
            net.num_classes()
        )));
    }
    let probs = net.predict_proba(test.features.view())?;
    let predicted: Vec<usize> = probs
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    let confusion = ConfusionMatrix::from_labels(&test.labels, &predicted, test.num_classes)?;
    Ok(Evaluation { f1: confusion.f1(averaging), accuracy: confusion.accuracy(), confusion })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Population standard deviation (divisor n).
    pub std: f64,
}

pub fn aggregate_runs(values: &[f64]) -> Result<Aggregate, ProbeError> {
    if values.is_empty() {
        return Err(ProbeError::Empty("run list"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(Aggregate { mean, std: var.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probecore::{ProbeConfig, ProbeParams};
    use ndarray::array;

    #[test]
    fn perfect_predictions() {
        let gold = [0, 1, 1, 0, 1];
        assert_eq!(f1_score(&gold, &gold, 2, Averaging::Macro).unwrap(), 1.0);
        assert_eq!(f1_score(&gold, &gold, 2, Averaging::BinaryPositive).unwrap(), 1.0);
    }

    #[test]
    fn half_right_binary() {
        let gold = [1, 1, 0, 0];
        let pred = [1, 0, 1, 0];
        let m = ConfusionMatrix::from_labels(&gold, &pred, 2).unwrap();
        assert_eq!(m.class_f1(0), 0.5);
        assert_eq!(m.class_f1(1), 0.5);
        assert_eq!(m.f1(Averaging::Macro), 0.5);
        assert_eq!(m.accuracy(), 0.5);
    }

    #[test]
    fn majority_predictor_scores_one_third() {
        let gold = [0, 1, 0, 1, 0, 1];
        let pred = [0; 6];
        let f1 = f1_score(&gold, &pred, 2, Averaging::Macro).unwrap();
        assert!((f1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_score(&gold, &pred, 2, Averaging::BinaryPositive).unwrap(), 0.0);
        assert_eq!(f1_score(&gold, &pred, 2, Averaging::Micro).unwrap(), 0.5);
    }

    #[test]
    fn macro_skips_absent_classes() {
        let f1 = f1_score(&[0, 1], &[0, 1], 3, Averaging::Macro).unwrap();
        assert_eq!(f1, 1.0);
    }

    #[test]
    fn aggregates() {
        let a = aggregate_runs(&[0.5]).unwrap();
        assert_eq!((a.mean, a.std), (0.5, 0.0));
        let a = aggregate_runs(&[0.4, 0.6]).unwrap();
        assert!((a.mean - 0.5).abs() < 1e-15 && (a.std - 0.1).abs() < 1e-15);
        assert_eq!(aggregate_runs(&[0.7; 5]).unwrap().std, 0.0);
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn ties_go_to_the_lowest_class() {
        let net = ProbeNetwork::from_params(ProbeParams::zeros(2, 2, 3), &ProbeConfig::new(2, 3));
        let set = ProbeSet::new(array![[1.0, 2.0], [3.0, 4.0]], vec![0, 2], 3).unwrap();
        let eval = evaluate(&net, &set, Averaging::Macro).unwrap();
        assert_eq!(eval.confusion.count(0, 0), 1);
        assert_eq!(eval.confusion.count(2, 0), 1);
        assert_eq!(eval.accuracy, 0.5);
    }
}
