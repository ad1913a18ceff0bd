//! Pretraining cost, CO2 emissions and expected F1 gain per pretraining scale.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("no pretraining-run multiplier for a budget of {0} words")]
    UnknownBudget(u64),
    #[error("invalid cost parameters: {0}")]
    Params(String),
    #[error("task sets differ between {previous} and {current}")]
    TaskMismatch { previous: String, current: String },
    #[error("{0} has no F1 values")]
    EmptySize(String),
    #[error("at least one size is required")]
    NoSizes,
    #[error("F1 table: {0}")]
    Table(String),
}

/// Reference: one 30B-word pretraining run costs $60,948 and emits 6,990 lbs of CO2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    pub dollars_per_30b: f64,
    pub co2_lbs_per_30b: f64,
    /// Pretraining runs needed per word budget.
    pub run_counts: BTreeMap<u64, f64>,
    #[serde(default)]
    pub rounding: DollarRounding,
}

/// How the dollar figures are derived from the reference cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DollarRounding {
    /// Linear in the word count, no rounding.
    #[default]
    Exact,
    /// The reference cost is first converted to a whole-dollar rate per
    /// billion words (60,948 / 30 -> 2,032), and each single-run cost is
    /// rounded to whole dollars before multiplying by the run count. This is
    /// the convention behind the commonly quoted table (1M -> 50, 100M -> 5,075,
    /// 30B -> 609,600).
    WholeDollars,
}

pub const THIRTY_BILLION: f64 = 30e9;

impl Default for CostModelParams {
    fn default() -> Self {
        let run_counts = BTreeMap::from([
            (1_000_000, 25.0),
            (10_000_000, 25.0),
            (100_000_000, 25.0),
            (1_000_000_000, 10.0),
            (30_000_000_000, 10.0),
        ]);
        Self { dollars_per_30b: 60_948.0, co2_lbs_per_30b: 6_990.0, run_counts, rounding: DollarRounding::Exact }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub tokens: u64,
    pub runs: f64,
    pub dollars: f64,
    pub co2_lbs: f64,
    pub single_run_dollars: f64,
    pub single_run_co2_lbs: f64,
}

/// Cost of pretraining on `tokens` words using the multiplier from `params.run_counts`.
/// A zero budget costs nothing and needs no multiplier.
pub fn cost_estimate(tokens: u64, params: &CostModelParams) -> Result<CostEstimate, CostError> {
    let runs = match params.run_counts.get(&tokens) {
        Some(&r) => r,
        None if tokens == 0 => 0.0,
        None => return Err(CostError::UnknownBudget(tokens)),
    };
    cost_estimate_with_runs(tokens, runs, params)
}

pub fn cost_estimate_with_runs(tokens: u64, runs: f64, params: &CostModelParams) -> Result<CostEstimate, CostError> {
    if !(params.dollars_per_30b > 0.0 && params.co2_lbs_per_30b > 0.0) {
        return Err(CostError::Params("reference cost and emissions must be positive".into()));
    }
    if !(runs.is_finite() && runs >= 0.0) {
        return Err(CostError::Params(format!("run multiplier must be non-negative, got {runs}")));
    }
    let share = tokens as f64 / THIRTY_BILLION;
    let single_run_dollars = match params.rounding {
        DollarRounding::Exact => params.dollars_per_30b * share,
        DollarRounding::WholeDollars => {
            let per_billion = (params.dollars_per_30b / 30.0).round();
            (per_billion * tokens as f64 / 1e9).round()
        }
    };
    let single_run_co2_lbs = params.co2_lbs_per_30b * share;
    Ok(CostEstimate {
        tokens,
        runs,
        dollars: single_run_dollars * runs,
        co2_lbs: single_run_co2_lbs * runs,
        single_run_dollars,
        single_run_co2_lbs,
    })
}

/// F1 scores (percent) of one pretraining size, keyed by task. Each task may
/// carry several values (checkpoints, seeds); they are averaged first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeScores {
    pub label: String,
    pub scores: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub label: String,
    /// Mean F1 increase over the previous size in percentage points; `None` for the first size.
    pub gain: Option<f64>,
}

fn task_means(size: &SizeScores) -> Result<BTreeMap<&str, f64>, CostError> {
    size.scores
        .iter()
        .map(|(task, values)| {
            if values.is_empty() {
                return Err(CostError::EmptySize(format!("{}/{task}", size.label)));
            }
            Ok((task.as_str(), values.iter().sum::<f64>() / values.len() as f64))
        })
        .collect()
}

/// Mean over tasks of the F1 change between consecutive sizes (ascending order).
pub fn gain_table(sizes: &[SizeScores]) -> Result<Vec<GainRow>, CostError> {
    let first = sizes.first().ok_or(CostError::NoSizes)?;
    if first.scores.is_empty() {
        return Err(CostError::EmptySize(first.label.clone()));
    }
    let mut rows = vec![GainRow { label: first.label.clone(), gain: None }];
    let mut previous = task_means(first)?;
    for pair in sizes.windows(2) {
        let current = task_means(&pair[1])?;
        if !current.keys().eq(previous.keys()) {
            return Err(CostError::TaskMismatch { previous: pair[0].label.clone(), current: pair[1].label.clone() });
        }
        let total: f64 = current.iter().map(|(task, f1)| f1 - previous[task]).sum();
        rows.push(GainRow { label: pair[1].label.clone(), gain: Some(total / current.len() as f64) });
        previous = current;
    }
    Ok(rows)
}

#[derive(Debug, Deserialize)]
struct F1Row {
    size: String,
    task: String,
    f1: f64,
}

/// Reads a `size,task,f1` CSV (F1 in percent, repeated rows averaged).
///
/// Sizes come out in ascending word-budget order when every label parses as a
/// budget, otherwise in order of first appearance.
pub fn read_size_scores<R: std::io::Read>(input: R) -> Result<Vec<SizeScores>, CostError> {
    let mut sizes: Vec<SizeScores> = Vec::new();
    for (line, row) in csv::Reader::from_reader(input).deserialize::<F1Row>().enumerate() {
        let row = row.map_err(|e| CostError::Table(e.to_string()))?;
        if !row.f1.is_finite() {
            return Err(CostError::Table(format!("row {}: F1 must be finite", line + 1)));
        }
        let size = match sizes.iter_mut().position(|s| s.label == row.size) {
            Some(i) => &mut sizes[i],
            None => {
                sizes.push(SizeScores { label: row.size.clone(), scores: BTreeMap::new() });
                sizes.last_mut().expect("just pushed")
            }
        };
        size.scores.entry(row.task).or_default().push(row.f1);
    }
    if sizes.iter().all(|s| parse_budget(&s.label).is_some()) {
        sizes.sort_by_key(|s| parse_budget(&s.label));
    }
    Ok(sizes)
}

/// Word budget label such as `1M`, `100M`, `1B`, `30B`.
pub fn budget_label(tokens: u64) -> String {
    const UNITS: [(u64, &str); 3] = [(1_000_000_000, "B"), (1_000_000, "M"), (1_000, "K")];
    for (scale, suffix) in UNITS {
        if tokens >= scale && tokens.is_multiple_of(scale) {
            return format!("{}{suffix}", tokens / scale);
        }
    }
    tokens.to_string()
}

/// Parses `1M`, `30B`, `2500K` or a plain integer.
pub fn parse_budget(text: &str) -> Option<u64> {
    let text = text.trim();
    let (digits, scale) = match text.chars().last()?.to_ascii_uppercase() {
        'K' => (&text[..text.len() - 1], 1_000),
        'M' => (&text[..text.len() - 1], 1_000_000),
        'B' => (&text[..text.len() - 1], 1_000_000_000),
        _ => (text, 1),
    };
    digits.replace(['_', ','], "").parse::<u64>().ok()?.checked_mul(scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
}

/// Renders cost rows next to optional gains (matched by budget label).
pub fn render_table(estimates: &[CostEstimate], gains: &[GainRow], format: TableFormat) -> String {
    let gain_for = |label: &str| {
        gains
            .iter()
            .find(|g| g.label == label)
            .and_then(|g| g.gain)
            .map(|g| format!("{g:+.2}"))
            .unwrap_or_else(|| "--".into())
    };
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("tokens,runs,dollars,co2_lbs,gain\n");
            for e in estimates {
                let label = budget_label(e.tokens);
                let _ = writeln!(out, "{label},{},{:.2},{:.3},{}", e.runs, e.dollars, e.co2_lbs, gain_for(&label));
            }
        }
        TableFormat::Text => {
            let _ = writeln!(out, "{:>8} {:>12} {:>12} {:>8}", "# Tokens", "Costs ($)", "CO2 (lbs)", "Gain");
            for e in estimates {
                let label = budget_label(e.tokens);
                let _ = writeln!(
                    out,
                    "{label:>8} {:>12} {:>12} {:>8}",
                    group_thousands(e.dollars, 0),
                    group_thousands(e.co2_lbs, 3),
                    gain_for(&label)
                );
            }
        }
    }
    out
}

fn group_thousands(value: f64, decimals: usize) -> String {
    let text = format!("{value:.decimals$}");
    let (int, frac) = text.split_once('.').map_or((text.as_str(), None), |(i, f)| (i, Some(f)));
    let mut grouped = String::new();
    for (i, ch) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    match frac {
        Some(f) => format!("{grouped}.{f}"),
        None => grouped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(label: &str, pairs: &[(&str, f64)]) -> SizeScores {
        SizeScores { label: label.into(), scores: pairs.iter().map(|(t, v)| (t.to_string(), vec![*v])).collect() }
    }

    #[test]
    fn one_million_words() {
        let e = cost_estimate(1_000_000, &CostModelParams::default()).unwrap();
        assert!((e.dollars - 50.79).abs() < 1e-9);
        assert!((e.co2_lbs - 5.825).abs() < 1e-9);
        assert!((e.single_run_dollars - 2.0316).abs() < 1e-12);
        assert_eq!(e.runs, 25.0);
    }

    #[test]
    fn one_billion_words() {
        let e = cost_estimate(1_000_000_000, &CostModelParams::default()).unwrap();
        assert!((e.dollars - 20_316.0).abs() < 1e-6);
        assert!((e.dollars - 20_320.0).abs() / 20_320.0 < 0.005);
        assert!((e.co2_lbs - 2_330.0).abs() < 1e-6);
    }

    #[test]
    fn whole_dollar_convention() {
        let p = CostModelParams { rounding: DollarRounding::WholeDollars, ..CostModelParams::default() };
        let dollars: Vec<f64> = [1_000_000u64, 10_000_000, 100_000_000, 1_000_000_000, 30_000_000_000]
            .iter()
            .map(|&t| cost_estimate(t, &p).unwrap().dollars)
            .collect();
        assert_eq!(dollars, vec![50.0, 500.0, 5_075.0, 20_320.0, 609_600.0]);
        assert_eq!(
            cost_estimate(1_000_000, &p).unwrap().co2_lbs,
            cost_estimate(1_000_000, &CostModelParams::default()).unwrap().co2_lbs
        );
    }

    #[test]
    fn zero_and_unknown_budgets() {
        let p = CostModelParams::default();
        let e = cost_estimate(0, &p).unwrap();
        assert_eq!((e.dollars, e.co2_lbs), (0.0, 0.0));
        assert_eq!(cost_estimate(5, &p), Err(CostError::UnknownBudget(5)));
        assert!((cost_estimate_with_runs(5_000_000, 2.0, &p).unwrap().dollars - 20.316).abs() < 1e-9);
    }

    #[test]
    fn unscaled_cost_is_linear() {
        let p = CostModelParams::default();
        for tokens in [1u64, 7, 1_000_000, 123_456_789] {
            let a = cost_estimate_with_runs(tokens, 1.0, &p).unwrap();
            let b = cost_estimate_with_runs(2 * tokens, 1.0, &p).unwrap();
            assert_eq!(b.single_run_dollars, 2.0 * a.single_run_dollars);
            assert_eq!(b.single_run_co2_lbs, 2.0 * a.single_run_co2_lbs);
            assert!((a.dollars / a.co2_lbs - 60_948.0 / 6_990.0).abs() < 1e-12);
        }
    }

    #[test]
    fn f1_table_is_sorted_by_budget() {
        let text = "size,task,f1\n10M,a,62.0\n1M,a,60.0\n10M,a,63.0\n1M,b,50.0\n10M,b,50.0\n";
        let sizes = read_size_scores(text.as_bytes()).unwrap();
        assert_eq!(sizes[0].label, "1M");
        assert_eq!(sizes[1].scores["a"], vec![62.0, 63.0]);
        let rows = gain_table(&sizes).unwrap();
        assert!((rows[1].gain.unwrap() - 1.25).abs() < 1e-12);
        assert!(read_size_scores("size,task,f1\n1M,a,x\n".as_bytes()).is_err());
    }

    #[test]
    fn gains() {
        let rows = gain_table(&[scores("1M", &[("a", 60.0)]), scores("10M", &[("a", 62.61)])]).unwrap();
        assert_eq!(rows[0].gain, None);
        assert!((rows[1].gain.unwrap() - 2.61).abs() < 1e-12);

        let rows =
            gain_table(&[scores("x", &[("a", 50.0), ("b", 70.0)]), scores("y", &[("a", 52.0), ("b", 74.0)])]).unwrap();
        assert_eq!(rows[1].gain, Some(3.0));

        let flat = gain_table(&[scores("x", &[("a", 50.0)]), scores("y", &[("a", 50.0)]), scores("z", &[("a", 50.0)])])
            .unwrap();
        assert!(flat[1..].iter().all(|r| r.gain == Some(0.0)));

        let err = gain_table(&[scores("x", &[("a", 1.0)]), scores("y", &[("b", 1.0)])]).unwrap_err();
        assert!(matches!(err, CostError::TaskMismatch { .. }));
        assert_eq!(gain_table(&[]), Err(CostError::NoSizes));
    }

    #[test]
    fn checkpoint_values_are_averaged_per_task() {
        let mut small = scores("1M", &[("a", 0.0)]);
        small.scores.insert("a".into(), vec![58.0, 60.0, 62.0]);
        let big = scores("10M", &[("a", 63.0)]);
        assert_eq!(gain_table(&[small, big]).unwrap()[1].gain, Some(3.0));
    }

    #[test]
    fn budgets_and_table() {
        assert_eq!(parse_budget("30B"), Some(30_000_000_000));
        assert_eq!(parse_budget("100m"), Some(100_000_000));
        assert_eq!(parse_budget("1,000"), Some(1000));
        assert_eq!(parse_budget("x"), None);
        assert_eq!(budget_label(1_000_000_000), "1B");
        assert_eq!(budget_label(30_000_000_000), "30B");
        assert_eq!(group_thousands(609_480.0, 0), "609,480");
        assert_eq!(group_thousands(69_900.0, 3), "69,900.000");

        let p = CostModelParams::default();
        let est: Vec<_> = [1_000_000u64, 10_000_000].iter().map(|&t| cost_estimate(t, &p).unwrap()).collect();
        let gains = vec![GainRow { label: "1M".into(), gain: None }, GainRow { label: "10M".into(), gain: Some(2.61) }];
        let csv = render_table(&est, &gains, TableFormat::Csv);
        assert_eq!(csv.lines().nth(2).unwrap(), "10M,25,507.90,58.250,+2.61");
        let text = render_table(&est, &gains, TableFormat::Text);
        assert!(text.lines().nth(1).unwrap().ends_with("--"));
    }
}
