//! Trace, summary and plot-data files written by the command-line tool.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::metrics::{Comparison, RunReport};
use crate::simulation::Trace;

/// Header of the trace file.
pub fn trace_header(trace: &Trace) -> Vec<String> {
    let mut h = vec!["time".to_owned()];
    h.extend((1..=trace.zones).map(|i| format!("t_{i}")));
    h.extend((1..=trace.rooms).map(|i| format!("tset_{i}")));
    h.extend((1..=trace.rooms).map(|i| format!("u_{i}")));
    h.push("u_slack".to_owned());
    h.extend((1..=trace.rooms).map(|i| format!("f_{i}")));
    h.push("residual".to_owned());
    h.push("objective".to_owned());
    h
}

/// Full trace as comma-separated text, one row per step.
pub fn trace_csv(trace: &Trace) -> String {
    let mut out = trace_header(trace).join(",");
    out.push('\n');
    for r in &trace.rows {
        let mut fields = vec![r.time];
        fields.extend(&r.temperatures);
        fields.extend(&r.setpoints);
        fields.extend(&r.allocation);
        fields.extend(&r.payoffs);
        fields.push(r.residual);
        fields.push(r.objective);
        push_row(&mut out, &fields);
    }
    out
}

fn push_row(out: &mut String, fields: &[f64]) {
    for (i, v) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

fn table(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        push_row(&mut out, &row);
    }
    out
}

/// Room temperatures next to their setpoints.
pub fn temperatures_csv(trace: &Trace) -> String {
    let k = trace.rooms;
    let mut header = vec!["time".to_owned()];
    header.extend((1..=k).map(|i| format!("t_{i}")));
    header.extend((1..=k).map(|i| format!("tset_{i}")));
    table(
        &header,
        trace.rows.iter().map(|r| {
            let mut v = vec![r.time];
            v.extend(&r.temperatures[..k]);
            v.extend(&r.setpoints);
            v
        }),
    )
}

pub fn actuators_csv(trace: &Trace) -> String {
    let mut header = vec!["time".to_owned()];
    header.extend((1..=trace.rooms).map(|i| format!("u_{i}")));
    header.push("u_slack".to_owned());
    table(
        &header,
        trace.rows.iter().map(|r| {
            let mut v = vec![r.time];
            v.extend(&r.allocation);
            v
        }),
    )
}

pub fn payoffs_csv(trace: &Trace) -> String {
    let mut header = vec!["time".to_owned()];
    header.extend((1..=trace.rooms).map(|i| format!("f_{i}")));
    header.push("f_mean".to_owned());
    table(
        &header,
        trace.rows.iter().map(|r| {
            let mut v = vec![r.time];
            v.extend(&r.payoffs);
            v.push(r.payoffs.iter().sum::<f64>() / r.payoffs.len().max(1) as f64);
            v
        }),
    )
}

/// Mean room payoff of two runs on a shared time grid.
pub fn paired_payoffs_csv(a: (&str, &Trace), b: (&str, &Trace)) -> String {
    let header = vec![
        "time".to_owned(),
        format!("{}_f_mean", a.0),
        format!("{}_f_mean", b.0),
    ];
    let mean = |p: &[f64]| p.iter().sum::<f64>() / p.len().max(1) as f64;
    table(
        &header,
        a.1.rows
            .iter()
            .zip(&b.1.rows)
            .map(|(x, y)| vec![x.time, mean(&x.payoffs), mean(&y.payoffs)]),
    )
}

const PLOT_SCRIPT: &str = r#"# Plot the data files in this directory.
# Usage: python plot.py
import csv
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent


def load(name):
    with open(HERE / name) as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], [[float(v) for v in r] for r in rows[1:]]
    return header, list(zip(*body))


for name, title in [
    ("temperatures.csv", "Room temperatures and setpoints"),
    ("actuators.csv", "Actuator outputs"),
    ("payoffs.csv", "Payoffs"),
]:
    header, cols = load(name)
    fig, ax = plt.subplots()
    for label, col in zip(header[1:], cols[1:]):
        ax.plot(cols[0], col, linewidth=0.6, label=label if len(header) < 12 else None)
    ax.set_xlabel("time (h)")
    ax.set_title(title)
    fig.savefig(HERE / name.replace(".csv", ".png"), dpi=150)
"#;

const PAIRED_SCRIPT: &str = r#"# Plot the mean payoff of both runs.
# Usage: python plot_paired.py
import csv
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent

with open(HERE / "paired_payoffs.csv") as fh:
    rows = list(csv.reader(fh))
header, cols = rows[0], list(zip(*[[float(v) for v in r] for r in rows[1:]]))
fig, ax = plt.subplots()
for label, col in zip(header[1:], cols[1:]):
    ax.plot(cols[0], col, label=label)
ax.axhline(0.0, color="black", linewidth=0.5)
ax.set_xlabel("time (h)")
ax.set_ylabel("mean payoff (C)")
ax.legend()
fig.savefig(HERE / "paired_payoffs.png", dpi=150)
"#;

/// Machine-readable outcome of one run.
#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub scenario_name: &'a str,
    pub status: &'a str,
    /// Present when the run aborted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub steps: usize,
    pub dt: f64,
    pub report: Option<&'a RunReport>,
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

/// Writes `trace.csv`, `summary.json` and `plots/` into `dir`.
pub fn write_run(dir: &Path, trace: &Trace, summary: &Summary) -> io::Result<()> {
    fs::create_dir_all(dir.join("plots"))?;
    fs::write(dir.join("trace.csv"), trace_csv(trace))?;
    fs::write(dir.join("summary.json"), json(summary))?;
    fs::write(dir.join("plots/temperatures.csv"), temperatures_csv(trace))?;
    fs::write(dir.join("plots/actuators.csv"), actuators_csv(trace))?;
    fs::write(dir.join("plots/payoffs.csv"), payoffs_csv(trace))?;
    fs::write(dir.join("plots/plot.py"), PLOT_SCRIPT)?;
    Ok(())
}

/// Writes `comparison.json` and the paired plot data into `dir`.
pub fn write_comparison(
    dir: &Path,
    comparison: &Comparison,
    a: (&str, &Trace),
    b: (&str, &Trace),
) -> io::Result<()> {
    fs::create_dir_all(dir.join("plots"))?;
    fs::write(dir.join("comparison.json"), json(comparison))?;
    fs::write(
        dir.join("plots/paired_payoffs.csv"),
        paired_payoffs_csv(a, b),
    )?;
    fs::write(dir.join("plots/plot_paired.py"), PAIRED_SCRIPT)?;
    Ok(())
}
