//! Post-processing of traces: tracking quality, startup transience,
//! overshoot, constraint compliance, energy use and run comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::population::BoundedSimplex;
use crate::simulation::Trace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("settling band must be positive, got {0}")]
    Band(f64),
    #[error("reports come from different scenarios ({0} vs {1})")]
    Provenance(String, String),
}

/// Default settling band in °C.
pub const SETTLING_BAND: f64 = 0.5;
/// Fraction of the horizon treated as steady state.
pub const STEADY_STATE_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rmse {
    pub per_room: Vec<f64>,
    pub aggregate: f64,
}

/// Root-mean-square payoff per room over all rows; aggregate is the mean over rooms.
pub fn tracking_rmse(trace: &Trace) -> Result<Rmse, MetricsError> {
    if trace.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let len = trace.len() as f64;
    let per_room: Vec<f64> = (0..trace.rooms)
        .map(|i| {
            (trace
                .rows
                .iter()
                .map(|r| r.payoffs[i] * r.payoffs[i])
                .sum::<f64>()
                / len)
                .sqrt()
        })
        .collect();
    let aggregate = mean(&per_room);
    Ok(Rmse {
        per_room,
        aggregate,
    })
}

/// Per-room peak of positive payoff from the first row at or above setpoint.
pub fn overshoot(trace: &Trace) -> Vec<f64> {
    (0..trace.rooms)
        .map(|i| {
            let series = trace.rows.iter().map(|r| r.payoffs[i]);
            let first = trace.rows.iter().position(|r| r.payoffs[i] >= 0.0);
            match first {
                Some(start) => series.skip(start).fold(0.0, f64::max),
                None => 0.0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transience {
    /// Sign changes of the room-mean payoff before it settles.
    pub crossings: usize,
    /// Time of entry into the band for good; `None` if still outside at the end.
    pub settling_time: Option<f64>,
}

/// Counts sign changes of the mean room payoff up to the permanent entry into `±band`.
pub fn transience(trace: &Trace, band: f64) -> Result<Transience, MetricsError> {
    if band.is_nan() || band <= 0.0 {
        return Err(MetricsError::Band(band));
    }
    if trace.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let series: Vec<f64> = trace.rows.iter().map(|r| mean(&r.payoffs)).collect();
    let last_outside = series.iter().rposition(|v| v.abs() > band);
    let (settle_index, settling_time) = match last_outside {
        None => (0, Some(trace.rows[0].time)),
        Some(i) if i + 1 < series.len() => (i + 1, Some(trace.rows[i + 1].time)),
        Some(i) => (i, None),
    };
    let mut crossings = 0;
    let mut previous = 0.0;
    for &v in &series[..=settle_index] {
        if v != 0.0 {
            if previous != 0.0 && v.signum() != previous {
                crossings += 1;
            }
            previous = v.signum();
        }
    }
    Ok(Transience {
        crossings,
        settling_time,
    })
}

/// Box breaches per (row, strategy) plus rows whose mass is off by more than `1e-9·total`.
pub fn constraint_violations(trace: &Trace, geometry: &BoundedSimplex) -> usize {
    trace
        .rows
        .iter()
        .map(|r| geometry.violations(&r.allocation))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyUse {
    /// kWh per room.
    pub per_room: Vec<f64>,
    pub delivered: f64,
    pub slack: f64,
}

/// Left Riemann sums of the allocations, matching what the plant integrated.
pub fn energy_used(trace: &Trace) -> EnergyUse {
    energy_between(trace, f64::NEG_INFINITY, f64::INFINITY)
}

/// Energy over the steps whose start time lies in `[from, to)`.
pub fn energy_between(trace: &Trace, from: f64, to: f64) -> EnergyUse {
    let k = trace.rooms;
    let mut per_room = vec![0.0; k];
    let mut slack = 0.0;
    for pair in trace.rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.time < from || a.time >= to {
            continue;
        }
        let width = b.time - a.time;
        for (acc, u) in per_room.iter_mut().zip(&a.allocation) {
            *acc += u * width;
        }
        slack += a.allocation[k] * width;
    }
    EnergyUse {
        delivered: per_room.iter().sum(),
        per_room,
        slack,
    }
}

/// Mean |payoff| over rooms and the trailing fraction of rows.
pub fn steady_state_mean_abs_payoff(trace: &Trace, fraction: f64) -> Result<f64, MetricsError> {
    if trace.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let start = (trace.len() as f64 * (1.0 - fraction)).floor() as usize;
    let tail = &trace.rows[start.min(trace.len() - 1)..];
    let total: f64 = tail
        .iter()
        .map(|r| r.payoffs.iter().map(|f| f.abs()).sum::<f64>())
        .sum();
    Ok(total / (tail.len() * trace.rooms.max(1)) as f64)
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Fingerprint of the scenario the run came from.
    pub scenario: String,
    pub controller: String,
    pub horizon: f64,
    pub rmse: Rmse,
    pub overshoot_per_room: Vec<f64>,
    pub peak_overshoot: f64,
    pub crossings: usize,
    pub settling_time: Option<f64>,
    pub settling_band: f64,
    pub constraint_violations: usize,
    pub energy: EnergyUse,
    pub steady_state_mean_abs_payoff: f64,
    pub final_residual: f64,
}

pub fn report(
    trace: &Trace,
    geometry: &BoundedSimplex,
    scenario: &str,
    controller: &str,
    band: f64,
) -> Result<RunReport, MetricsError> {
    let rmse = tracking_rmse(trace)?;
    let overshoot_per_room = overshoot(trace);
    let peak_overshoot = overshoot_per_room.iter().copied().fold(0.0, f64::max);
    let tr = transience(trace, band)?;
    Ok(RunReport {
        scenario: scenario.to_owned(),
        controller: controller.to_owned(),
        horizon: trace.duration(),
        rmse,
        overshoot_per_room,
        peak_overshoot,
        crossings: tr.crossings,
        settling_time: tr.settling_time,
        settling_band: band,
        constraint_violations: constraint_violations(trace, geometry),
        energy: energy_used(trace),
        steady_state_mean_abs_payoff: steady_state_mean_abs_payoff(trace, STEADY_STATE_FRACTION)?,
        final_residual: trace.last().map_or(0.0, |r| r.residual),
    })
}

/// One metric side by side. `None` marks a missing value such as "unsettled".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `b - a` when both are present.
    pub delta: Option<f64>,
}

/// Comparison keyed by metric name, so row order never matters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub a: String,
    pub b: String,
    pub metrics: BTreeMap<String, MetricDelta>,
}

pub fn compare(a: &RunReport, b: &RunReport) -> Result<Comparison, MetricsError> {
    if a.scenario != b.scenario {
        return Err(MetricsError::Provenance(
            a.scenario.clone(),
            b.scenario.clone(),
        ));
    }
    let mut metrics = BTreeMap::new();
    let mut put = |name: &str, x: Option<f64>, y: Option<f64>| {
        let delta = x.zip(y).map(|(x, y)| y - x);
        metrics.insert(name.to_owned(), MetricDelta { a: x, b: y, delta });
    };
    put(
        "rmse_aggregate",
        Some(a.rmse.aggregate),
        Some(b.rmse.aggregate),
    );
    put(
        "peak_overshoot",
        Some(a.peak_overshoot),
        Some(b.peak_overshoot),
    );
    put(
        "crossings",
        Some(a.crossings as f64),
        Some(b.crossings as f64),
    );
    put("settling_time", a.settling_time, b.settling_time);
    put(
        "constraint_violations",
        Some(a.constraint_violations as f64),
        Some(b.constraint_violations as f64),
    );
    put(
        "energy_delivered",
        Some(a.energy.delivered),
        Some(b.energy.delivered),
    );
    put("energy_slack", Some(a.energy.slack), Some(b.energy.slack));
    put(
        "steady_state_mean_abs_payoff",
        Some(a.steady_state_mean_abs_payoff),
        Some(b.steady_state_mean_abs_payoff),
    );
    put(
        "final_residual",
        Some(a.final_residual),
        Some(b.final_residual),
    );
    Ok(Comparison {
        scenario: a.scenario.clone(),
        a: a.controller.clone(),
        b: b.controller.clone(),
        metrics,
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
