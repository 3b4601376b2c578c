//! Self-contained SVG plots: mean cumulative regret per method with 95%
//! normal-approximation bands. No external assets, fonts, or scripts.

use std::fmt::Write as _;

use super::csv::{is_logged, CsvSeries};
use super::ExperimentResult;
use crate::error::{Error, Result};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 58.0;

/// One curve with its confidence band, on a shared round grid.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub ts: Vec<f64>,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Collapses per-repetition curves (each a `(round, value)` list on the
/// same round grid) into mean ± 1.96·s/√n.
pub fn aggregate(label: &str, reps: &[Vec<(u64, f64)>]) -> Result<PlotSeries> {
    let first = reps
        .first()
        .ok_or_else(|| Error::InvalidInput(format!("{label}: no repetitions to aggregate")))?;
    if first.is_empty() {
        return Err(Error::InvalidInput(format!("{label}: empty repetition")));
    }
    let grid: Vec<u64> = first.iter().map(|&(t, _)| t).collect();
    for (ix, rep) in reps.iter().enumerate() {
        let this: Vec<u64> = rep.iter().map(|&(t, _)| t).collect();
        if this != grid {
            return Err(Error::InvalidInput(format!(
                "{label}: repetition {ix} is on a different round grid"
            )));
        }
    }
    let n = reps.len() as f64;
    let mut mean = Vec::with_capacity(grid.len());
    let mut lo = Vec::with_capacity(grid.len());
    let mut hi = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let values: Vec<f64> = reps.iter().map(|rep| rep[i].1).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{label}: non-finite value at round {}",
                grid[i]
            )));
        }
        let m = values.iter().sum::<f64>() / n;
        let half = if values.len() >= 2 {
            let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
            1.96 * (var / n).sqrt()
        } else {
            0.0
        };
        mean.push(m);
        lo.push(m - half);
        hi.push(m + half);
    }
    Ok(PlotSeries {
        label: label.to_string(),
        ts: grid.iter().map(|&t| t as f64).collect(),
        mean,
        lo,
        hi,
    })
}

/// Builds one series per method from an experiment result, on the same
/// logged-round grid the CSV uses.
pub fn series_from_result(result: &ExperimentResult) -> Result<Vec<PlotSeries>> {
    let stride = result.config.log_stride;
    result
        .methods
        .iter()
        .map(|m| {
            let reps: Vec<Vec<(u64, f64)>> = m
                .traces
                .iter()
                .map(|trace| {
                    let total = trace.len() as u64;
                    let cum = trace.cumulative();
                    (1..=total)
                        .filter(|&t| is_logged(t, total, stride))
                        .map(|t| (t, cum[(t - 1) as usize]))
                        .collect()
                })
                .collect();
            aggregate(m.method.label(), &reps)
        })
        .collect()
}

/// Builds one series per method from parsed CSV rows, cumulative-regret
/// column, methods in first-appearance order.
pub fn series_from_csv(rows: &[CsvSeries]) -> Result<Vec<PlotSeries>> {
    let mut labels: Vec<&str> = Vec::new();
    for row in rows {
        if !labels.contains(&row.method.as_str()) {
            labels.push(&row.method);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let reps: Vec<Vec<(u64, f64)>> = rows
                .iter()
                .filter(|row| row.method == label)
                .map(|row| row.points.iter().map(|&(t, _, cum)| (t, cum)).collect())
                .collect();
            aggregate(label, &reps)
        })
        .collect()
}

fn color_for(label: &str) -> &'static str {
    match label {
        "oful" => "#d62728",
        "estr-bm" => "#1f77b4",
        "estr-os" => "#2ca02c",
        "isse" => "#9467bd",
        _ => "#7f7f7f",
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.abs() >= 1.0 && (v - v.round()).abs() < 1e-9 * v.abs().max(1.0) {
        return format!("{}", v.round() as i64);
    }
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Largest of 1/2/5 × 10^k not exceeding the range divided by the target
/// tick count.
fn nice_step(range: f64, target: usize) -> f64 {
    let raw = range / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    for mult in [1.0, 2.0, 5.0, 10.0] {
        if raw <= mult * mag * (1.0 + 1e-12) {
            return mult * mag;
        }
    }
    10.0 * mag
}

fn ticks(max: f64, target: usize) -> Vec<f64> {
    let step = nice_step(max.max(f64::MIN_POSITIVE), target);
    let mut out = vec![0.0];
    let mut v = step;
    while v <= max * (1.0 + 1e-9) {
        out.push(v);
        v += step;
    }
    out
}

/// Renders the full plot. Requires at least one series; every series must
/// be on its own nonempty grid with finite values.
pub fn render_plot(series: &[PlotSeries], title: &str) -> Result<String> {
    if series.is_empty() {
        return Err(Error::InvalidInput("nothing to plot".into()));
    }
    let mut x_max = 0f64;
    let mut y_max = 0f64;
    for s in series {
        if s.ts.is_empty() || s.ts.len() != s.mean.len() || s.ts.len() != s.lo.len() || s.ts.len() != s.hi.len() {
            return Err(Error::InvalidInput(format!("series {} is malformed", s.label)));
        }
        for i in 0..s.ts.len() {
            if !(s.ts[i].is_finite() && s.mean[i].is_finite() && s.lo[i].is_finite() && s.hi[i].is_finite()) {
                return Err(Error::InvalidInput(format!("series {} has non-finite values", s.label)));
            }
            x_max = x_max.max(s.ts[i]);
            y_max = y_max.max(s.hi[i]);
        }
    }
    if x_max <= 0.0 {
        return Err(Error::InvalidInput("round axis has zero extent".into()));
    }
    y_max = (y_max * 1.05).max(1e-12);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |t: f64| MARGIN_LEFT + t / x_max * plot_w;
    let sy = |v: f64| MARGIN_TOP + (1.0 - v / y_max) * plot_h;

    let mut out = String::new();
    write!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif">"##
    )
    .unwrap();
    out.push('\n');
    writeln!(out, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"##).unwrap();
    writeln!(
        out,
        r##"<text x="{:.1}" y="26" font-size="17" text-anchor="middle" fill="#222">{}</text>"##,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    )
    .unwrap();

    // Gridlines and tick labels.
    for v in ticks(y_max, 5) {
        let y = sy(v);
        writeln!(
            out,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd" stroke-width="1"/>"##,
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        )
        .unwrap();
        writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end" fill="#444">{}</text>"##,
            MARGIN_LEFT - 8.0,
            y + 4.0,
            fmt_tick(v)
        )
        .unwrap();
    }
    for t in ticks(x_max, 6) {
        let x = sx(t);
        writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd" stroke-width="1"/>"##,
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        )
        .unwrap();
        writeln!(
            out,
            r##"<text x="{x:.1}" y="{:.1}" font-size="12" text-anchor="middle" fill="#444">{}</text>"##,
            MARGIN_TOP + plot_h + 18.0,
            fmt_tick(t)
        )
        .unwrap();
    }
    // Axes on top of the grid.
    writeln!(
        out,
        r##"<line x1="{l:.1}" y1="{t:.1}" x2="{l:.1}" y2="{b:.1}" stroke="#333" stroke-width="1.5"/>"##,
        l = MARGIN_LEFT,
        t = MARGIN_TOP,
        b = MARGIN_TOP + plot_h
    )
    .unwrap();
    writeln!(
        out,
        r##"<line x1="{l:.1}" y1="{b:.1}" x2="{r:.1}" y2="{b:.1}" stroke="#333" stroke-width="1.5"/>"##,
        l = MARGIN_LEFT,
        b = MARGIN_TOP + plot_h,
        r = MARGIN_LEFT + plot_w
    )
    .unwrap();
    writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle" fill="#222">round</text>"##,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    )
    .unwrap();
    writeln!(
        out,
        r##"<text x="20" y="{:.1}" font-size="13" text-anchor="middle" fill="#222" transform="rotate(-90 20 {:.1})">cumulative regret</text>"##,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    )
    .unwrap();

    // Bands first so every mean line stays visible.
    for s in series {
        let color = color_for(&s.label);
        let mut points = String::new();
        for i in 0..s.ts.len() {
            write!(points, "{:.2},{:.2} ", sx(s.ts[i]), sy(s.hi[i])).unwrap();
        }
        for i in (0..s.ts.len()).rev() {
            write!(points, "{:.2},{:.2} ", sx(s.ts[i]), sy(s.lo[i])).unwrap();
        }
        writeln!(
            out,
            r##"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"##,
            points.trim_end()
        )
        .unwrap();
    }
    for s in series {
        let color = color_for(&s.label);
        let mut points = String::new();
        for i in 0..s.ts.len() {
            write!(points, "{:.2},{:.2} ", sx(s.ts[i]), sy(s.mean[i])).unwrap();
        }
        writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"##,
            points.trim_end()
        )
        .unwrap();
    }

    // Legend, top-left corner of the plot area.
    let legend_x = MARGIN_LEFT + 14.0;
    let mut legend_y = MARGIN_TOP + 16.0;
    writeln!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="120" height="{:.1}" fill="white" fill-opacity="0.85" stroke="#ccc"/>"##,
        legend_x - 8.0,
        legend_y - 12.0,
        series.len() as f64 * 18.0 + 8.0
    )
    .unwrap();
    for s in series {
        let color = color_for(&s.label);
        writeln!(
            out,
            r##"<line x1="{legend_x:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2.5"/>"##,
            legend_y,
            legend_x + 24.0,
            legend_y
        )
        .unwrap();
        writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="13" fill="#222">{}</text>"##,
            legend_x + 32.0,
            legend_y + 4.0,
            escape(&s.label)
        )
        .unwrap();
        legend_y += 18.0;
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Convenience wrapper: aggregate an experiment result and render it.
pub fn render_experiment_plot(result: &ExperimentResult) -> Result<String> {
    let series = series_from_result(result)?;
    let title = format!(
        "Cumulative regret, mean over {} repetitions with 95% bands",
        result.config.reps
    );
    render_plot(&series, &title)
}
