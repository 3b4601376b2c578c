//! Flat-table serialization of regret traces.
//!
//! Columns: `method,rep,t,inst_regret,cum_regret` with `t` 1-based. Every
//! round up to 100 is logged; after that only multiples of the configured
//! stride, plus the final round.

use std::fmt::Write as _;

use super::ExperimentResult;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "method,rep,t,inst_regret,cum_regret";

/// Whether 1-based round `t` of a horizon-`total` run is logged.
pub fn is_logged(t: u64, total: u64, stride: u64) -> bool {
    t <= 100 || t % stride == 0 || t == total
}

/// Renders an experiment result as CSV text (LF line endings).
pub fn render_csv(result: &ExperimentResult) -> String {
    let stride = result.config.log_stride;
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for method in &result.methods {
        for (rep, trace) in method.traces.iter().enumerate() {
            let total = trace.len() as u64;
            let inst = trace.instantaneous();
            let cum = trace.cumulative();
            for t in 1..=total {
                if !is_logged(t, total, stride) {
                    continue;
                }
                let i = (t - 1) as usize;
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    method.method.label(),
                    rep,
                    t,
                    inst[i],
                    cum[i]
                )
                .expect("writing to a string cannot fail");
            }
        }
    }
    out
}

/// One parsed (method, rep) series, rounds ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSeries {
    pub method: String,
    pub rep: u64,
    /// (t, inst_regret, cum_regret) per logged round.
    pub points: Vec<(u64, f64, f64)>,
}

/// Parses CSV text produced by [`render_csv`]. Series come back grouped by
/// method in first-appearance order, repetitions ascending.
pub fn parse_csv(text: &str) -> Result<Vec<CsvSeries>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::InvalidInput(format!(
                "unexpected CSV header {header:?}, want {CSV_HEADER:?}"
            )))
        }
        None => return Err(Error::InvalidInput("empty CSV input".into())),
    }
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut series: std::collections::HashMap<(String, u64), Vec<(u64, f64, f64)>> =
        std::collections::HashMap::new();
    for (ix, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| {
            fields.next().ok_or_else(|| {
                Error::InvalidInput(format!("line {}: missing field {name}", ix + 1))
            })
        };
        let method = next("method")?.to_string();
        let rep: u64 = parse_field(next("rep")?, ix, "rep")?;
        let t: u64 = parse_field(next("t")?, ix, "t")?;
        let inst: f64 = parse_field(next("inst_regret")?, ix, "inst_regret")?;
        let cum: f64 = parse_field(next("cum_regret")?, ix, "cum_regret")?;
        if fields.next().is_some() {
            return Err(Error::InvalidInput(format!("line {}: too many fields", ix + 1)));
        }
        let key = (method, rep);
        if !series.contains_key(&key) {
            order.push(key.clone());
        }
        series.entry(key).or_default().push((t, inst, cum));
    }
    if order.is_empty() {
        return Err(Error::InvalidInput("CSV contains no data rows".into()));
    }
    let mut method_order: Vec<String> = Vec::new();
    for (m, _) in &order {
        if !method_order.iter().any(|seen| seen == m) {
            method_order.push(m.clone());
        }
    }
    let rank = |m: &str| {
        method_order
            .iter()
            .position(|seen| seen == m)
            .expect("method recorded on first appearance")
    };
    order.sort_by(|a, b| rank(&a.0).cmp(&rank(&b.0)).then(a.1.cmp(&b.1)));
    let mut out = Vec::with_capacity(order.len());
    for key in order {
        let mut points = series.remove(&key).expect("key recorded at insert");
        points.sort_by_key(|&(t, _, _)| t);
        out.push(CsvSeries {
            method: key.0,
            rep: key.1,
            points,
        });
    }
    Ok(out)
}

fn parse_field<T: std::str::FromStr>(raw: &str, line_ix: usize, name: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| {
        Error::InvalidInput(format!(
            "line {}: cannot parse {name} from {raw:?}",
            line_ix + 1
        ))
    })
}
