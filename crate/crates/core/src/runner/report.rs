//! Result files and SVG charts.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_runs_csv, AggregateResult, Metric, RunResult, RunnerError, AGGREGATES_FILE, RUNS_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Linear map from data coordinates to the SVG plot rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartFrame {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl ChartFrame {
    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let fx = if self.x_max > self.x_min { (x - self.x_min) / (self.x_max - self.x_min) } else { 0.5 };
        let fy = (y - self.y_min) / (self.y_max - self.y_min);
        (self.left + fx * self.width, self.top + (1.0 - fy) * self.height)
    }
}

fn value_range(lows: impl Iterator<Item = f64>, highs: impl Iterator<Item = f64>) -> (f64, f64) {
    let lo = lows.fold(f64::INFINITY, f64::min);
    let hi = highs.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 1e-12 { lo.abs() * 0.05 } else { 0.5 };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Frame used by [`render_layer_chart`] for one task and metric.
pub fn layer_chart_frame(aggregates: &[AggregateResult], task: &str, metric: Metric) -> ChartFrame {
    let rows: Vec<&AggregateResult> = aggregates.iter().filter(|a| a.task == task && a.metric == metric).collect();
    let x_min = rows.iter().map(|a| a.layer).min().unwrap_or(1) as f64;
    let x_max = rows.iter().map(|a| a.layer).max().unwrap_or(1) as f64;
    let (y_min, y_max) = value_range(rows.iter().map(|a| a.mean - a.std), rows.iter().map(|a| a.mean + a.std));
    ChartFrame {
        x_min,
        x_max,
        y_min,
        y_max,
        left: MARGIN_LEFT,
        top: MARGIN_TOP,
        width: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        height: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn points(coords: impl Iterator<Item = (f64, f64)>) -> String {
    coords.map(|(x, y)| format!("{x:.3},{y:.3}")).collect::<Vec<_>>().join(" ")
}

fn svg_open(out: &mut String, title: &str, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, frame: &ChartFrame, y_label: &str) {
    let bottom = frame.top + frame.height;
    let right = frame.left + frame.width;
    let _ = writeln!(
        out,
        r#"<path class="axes" d="M{l:.3},{t:.3} L{l:.3},{b:.3} L{r:.3},{b:.3}" stroke="black" fill="none"/>"#,
        l = frame.left,
        t = frame.top,
        b = bottom,
        r = right
    );
    for i in 0..=4 {
        let v = frame.y_min + (frame.y_max - frame.y_min) * f64::from(i) / 4.0;
        let (_, y) = frame.map(frame.x_min, v);
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{}</text>"#,
            frame.left - 6.0,
            y + 4.0,
            tick(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.3}" transform="rotate(-90 16 {:.3})" text-anchor="middle">{}</text>"#,
        frame.top + frame.height / 2.0,
        frame.top + frame.height / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(out: &mut String, encoders: &[&str], top: f64) {
    for (i, enc) in encoders.iter().enumerate() {
        let y = top + 18.0 * i as f64;
        let colour = PALETTE[i % PALETTE.len()];
        let x = WIDTH - MARGIN_RIGHT + 16.0;
        let _ = writeln!(out, r#"<rect x="{x}" y="{:.3}" width="12" height="12" fill="{colour}"/>"#, y - 10.0);
        let _ = writeln!(out, r#"<text x="{}" y="{y:.3}">{}</text>"#, x + 18.0, escape(enc));
    }
}

fn ordered_unique<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    items.filter(|s| seen.insert(*s)).collect()
}

/// Mean line per encoder over layers, with a band between mean - std and mean + std.
pub fn render_layer_chart(aggregates: &[AggregateResult], task: &str, metric: Metric) -> String {
    let frame = layer_chart_frame(aggregates, task, metric);
    let rows: Vec<&AggregateResult> = aggregates.iter().filter(|a| a.task == task && a.metric == metric).collect();
    let encoders = ordered_unique(rows.iter().map(|a| a.encoder.as_str()));
    let mut out = String::new();
    svg_open(&mut out, &format!("{task}: {metric} by layer"), HEIGHT);
    axes(&mut out, &frame, metric.name());
    let layers: BTreeSet<usize> = rows.iter().map(|a| a.layer).collect();
    for layer in &layers {
        let (x, _) = frame.map(*layer as f64, frame.y_min);
        let _ = writeln!(
            out,
            r#"<text x="{x:.3}" y="{:.3}" text-anchor="middle">{layer}</text>"#,
            frame.top + frame.height + 16.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">layer</text>"#,
        frame.left + frame.width / 2.0,
        HEIGHT - 10.0
    );
    for (i, enc) in encoders.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut series: Vec<&AggregateResult> = rows.iter().copied().filter(|a| a.encoder == *enc).collect();
        series.sort_by_key(|a| a.layer);
        let upper = series.iter().map(|a| frame.map(a.layer as f64, a.mean + a.std));
        let lower = series.iter().rev().map(|a| frame.map(a.layer as f64, a.mean - a.std));
        let _ = writeln!(
            out,
            r#"<polygon class="band" data-encoder="{}" points="{}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#,
            escape(enc),
            points(upper.chain(lower))
        );
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-encoder="{}" points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            escape(enc),
            points(series.iter().map(|a| frame.map(a.layer as f64, a.mean)))
        );
    }
    legend(&mut out, &encoders, frame.top + 10.0);
    out.push_str("</svg>\n");
    out
}

/// Grouped bars (tasks × encoders) at each pair's highest layer, one panel
/// per headline metric, with ±1 std whiskers.
pub fn render_overview(aggregates: &[AggregateResult]) -> String {
    let metrics: Vec<Metric> =
        [Metric::F1Macro, Metric::MdlBits].into_iter().filter(|m| aggregates.iter().any(|a| a.metric == *m)).collect();
    let panels = metrics.len().max(1) as f64;
    let total_height = HEIGHT * panels;
    let mut out = String::new();
    svg_open(&mut out, "Probe overview", total_height);
    let tasks = ordered_unique(aggregates.iter().map(|a| a.task.as_str()));
    let encoders = ordered_unique(aggregates.iter().map(|a| a.encoder.as_str()));
    for (p, metric) in metrics.iter().enumerate() {
        let offset = HEIGHT * p as f64;
        let top_layer = |task: &str, enc: &str| {
            aggregates
                .iter()
                .filter(|a| a.task == task && a.encoder == enc && a.metric == *metric)
                .max_by_key(|a| a.layer)
        };
        let bars: Vec<Option<&AggregateResult>> =
            tasks.iter().flat_map(|t| encoders.iter().map(move |e| (t, e))).map(|(t, e)| top_layer(t, e)).collect();
        let present = || bars.iter().flatten();
        let (lo, hi) = value_range(present().map(|a| a.mean - a.std), present().map(|a| a.mean + a.std));
        let frame = ChartFrame {
            x_min: 0.0,
            x_max: tasks.len() as f64,
            y_min: lo.min(0.0),
            y_max: hi,
            left: MARGIN_LEFT,
            top: MARGIN_TOP + offset,
            width: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            height: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
        };
        axes(&mut out, &frame, metric.name());
        let group_width = frame.width / tasks.len() as f64;
        let bar_width = 0.8 * group_width / encoders.len() as f64;
        let (_, base) = frame.map(0.0, frame.y_min.max(0.0));
        for (ti, task) in tasks.iter().enumerate() {
            let group_left = frame.left + group_width * ti as f64 + 0.1 * group_width;
            let _ = writeln!(
                out,
                r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
                frame.left + group_width * (ti as f64 + 0.5),
                frame.top + frame.height + 16.0,
                escape(task)
            );
            for (ei, enc) in encoders.iter().enumerate() {
                let Some(a) = bars[ti * encoders.len() + ei] else { continue };
                let colour = PALETTE[ei % PALETTE.len()];
                let x = group_left + bar_width * ei as f64;
                let (_, y) = frame.map(0.0, a.mean);
                let _ = writeln!(
                    out,
                    r#"<rect class="bar" data-task="{}" data-encoder="{}" x="{x:.3}" y="{:.3}" width="{bar_width:.3}" height="{:.3}" fill="{colour}"/>"#,
                    escape(task),
                    escape(enc),
                    y.min(base),
                    (base - y).abs()
                );
                let (_, y_hi) = frame.map(0.0, a.mean + a.std);
                let (_, y_lo) = frame.map(0.0, a.mean - a.std);
                let cx = x + bar_width / 2.0;
                let _ = writeln!(
                    out,
                    r#"<path class="whisker" d="M{cx:.3},{y_lo:.3} L{cx:.3},{y_hi:.3}" stroke="black"/>"#
                );
            }
        }
        legend(&mut out, &encoders, frame.top + 10.0);
    }
    out.push_str("</svg>\n");
    out
}

fn file_stem(text: &str) -> String {
    text.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), RunnerError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(contents)?;
    out.flush()?;
    Ok(())
}

/// Writes the requested formats into `out_dir` and returns the created files.
///
/// SVG output is `overview.svg` plus `layers_<task>_<metric>.svg` for every
/// task and headline metric probed at more than one layer.
pub fn emit_report(
    runs: &[RunResult],
    aggregates: &[AggregateResult],
    formats: &[ReportFormat],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, RunnerError> {
    if runs.is_empty() && aggregates.is_empty() {
        return Err(RunnerError::InvalidSpec("nothing to report".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    if formats.contains(&ReportFormat::Csv) {
        let path = out_dir.join(RUNS_FILE);
        let mut buf = Vec::new();
        write_runs_csv(runs, &mut buf)?;
        write_file(&path, &buf)?;
        written.push(path);
    }
    if formats.contains(&ReportFormat::Json) {
        let path = out_dir.join(AGGREGATES_FILE);
        let mut buf = serde_json::to_vec_pretty(aggregates)?;
        buf.push(b'\n');
        write_file(&path, &buf)?;
        written.push(path);
    }
    if formats.contains(&ReportFormat::Svg) && !aggregates.is_empty() {
        let path = out_dir.join("overview.svg");
        write_file(&path, render_overview(aggregates).as_bytes())?;
        written.push(path);
        for task in ordered_unique(aggregates.iter().map(|a| a.task.as_str())) {
            for metric in [Metric::F1Macro, Metric::MdlBits] {
                let layers: BTreeSet<usize> =
                    aggregates.iter().filter(|a| a.task == task && a.metric == metric).map(|a| a.layer).collect();
                if layers.len() < 2 {
                    continue;
                }
                let path = out_dir.join(format!("layers_{}_{}.svg", file_stem(task), metric.name()));
                write_file(&path, render_layer_chart(aggregates, task, metric).as_bytes())?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
