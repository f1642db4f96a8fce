//! The coupled plant and controller loop, consensus detection and rest-point
//! diagnostics in error coordinates.

use thiserror::Error;

use crate::controllers::{ControllerError, ControllerSpec, PayoffVector};
use crate::graph::CommGraph;
use crate::population::{BoundedSimplex, GeometryError, PopulationState};
use crate::thermal::{objective_value, payoff, BuildingNetwork, EnvironmentProfiles, ThermalError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{what}: expected length {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),
    #[error("horizon must be nonnegative and finite, got {0}")]
    Horizon(f64),
    #[error("initial allocation: {0}")]
    InitialAllocation(GeometryError),
    #[error("initial allocation must be strictly inside its bounds (strategy {0} is on a bound)")]
    NotInterior(usize),
    #[error("communication graph is disconnected")]
    Disconnected,
    #[error("non-finite initial temperature in zone {0}")]
    InitialTemperature(usize),
    #[error("slack payoff must be finite")]
    SlackPayoff,
}

/// Which part of the loop failed during a run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AbortCause {
    #[error("controller: {0}")]
    Controller(#[from] ControllerError),
    #[error("allocation: {0}")]
    Allocation(#[from] GeometryError),
    #[error("plant: {0}")]
    Plant(#[from] ThermalError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("run aborted at step {step} (t = {time} h): {cause}")]
    Aborted {
        step: usize,
        time: f64,
        cause: AbortCause,
        /// Rows up to the failure. When the allocation left its bounds the
        /// offending row is included as the last one.
        partial: Box<Trace>,
    },
    #[error("diagnostics window must lie in (0, 1], got {0}")]
    Window(f64),
    #[error("trace is empty")]
    EmptyTrace,
}

/// Everything needed for one closed-loop run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub building: BuildingNetwork,
    pub environment: EnvironmentProfiles,
    /// Rooms followed by the slack strategy.
    pub geometry: BoundedSimplex,
    pub graph: CommGraph,
    pub controller: ControllerSpec,
    pub horizon: f64,
    pub dt: f64,
    pub initial_temperatures: Vec<f64>,
    pub initial_allocation: Vec<f64>,
    /// Constant payoff reported by the slack strategy.
    pub slack_payoff: f64,
}

impl Scenario {
    /// Checks dimensions, connectivity and that the initial allocation is an
    /// interior point carrying the full budget.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let k = self.building.room_count();
        let zones = self.building.zone_count();
        let dim = |what, expected, actual| {
            if expected == actual {
                Ok(())
            } else {
                Err(ScenarioError::Dimension {
                    what,
                    expected,
                    actual,
                })
            }
        };
        dim("strategies (rooms + slack)", k + 1, self.geometry.len())?;
        dim("graph nodes", k + 1, self.graph.node_count())?;
        dim("setpoint profiles", k, self.environment.setpoints.len())?;
        if !self.environment.disturbances.is_empty() {
            dim(
                "disturbance profiles",
                zones,
                self.environment.disturbances.len(),
            )?;
        }
        dim(
            "initial temperatures",
            zones,
            self.initial_temperatures.len(),
        )?;
        dim("initial allocation", k + 1, self.initial_allocation.len())?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ScenarioError::TimeStep(self.dt));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(ScenarioError::Horizon(self.horizon));
        }
        if let Some(i) = self
            .initial_temperatures
            .iter()
            .position(|t| !t.is_finite())
        {
            return Err(ScenarioError::InitialTemperature(i + 1));
        }
        if !self.slack_payoff.is_finite() {
            return Err(ScenarioError::SlackPayoff);
        }
        if !self.graph.is_connected() {
            return Err(ScenarioError::Disconnected);
        }
        check_initial_allocation(&self.geometry, &self.initial_allocation)
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Resource constraint and strict interiority of a starting allocation.
pub fn check_initial_allocation(geometry: &BoundedSimplex, x: &[f64]) -> Result<(), ScenarioError> {
    let sum: f64 = x.iter().sum();
    if (sum - geometry.total()).abs() > geometry.tolerance() {
        return Err(ScenarioError::InitialAllocation(GeometryError::Mass {
            sum,
            total: geometry.total(),
        }));
    }
    for (i, (&v, (&lo, &up))) in x
        .iter()
        .zip(geometry.lower().iter().zip(geometry.upper()))
        .enumerate()
    {
        if !(v > lo && v < up) {
            if v < lo || v > up || !v.is_finite() {
                return Err(ScenarioError::InitialAllocation(
                    GeometryError::OutOfBounds {
                        index: i + 1,
                        value: v,
                        lower: lo,
                        upper: up,
                    },
                ));
            }
            return Err(ScenarioError::NotInterior(i + 1));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    /// All zones.
    pub temperatures: Vec<f64>,
    pub setpoints: Vec<f64>,
    /// Rooms followed by the slack.
    pub allocation: Vec<f64>,
    /// Rooms only.
    pub payoffs: Vec<f64>,
    /// Escort weights, rooms followed by the slack.
    pub escort: Vec<f64>,
    pub residual: f64,
    pub objective: f64,
}

/// Time-indexed record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rooms: usize,
    pub zones: usize,
    pub dt: f64,
    pub slack_payoff: f64,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Horizon covered by the rows.
    pub fn duration(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }

    /// Payoffs including the slack, as seen by the controller.
    pub fn full_payoffs(&self, row: &TraceRow) -> Vec<f64> {
        let mut f = row.payoffs.clone();
        f.push(self.slack_payoff);
        f
    }
}

/// Largest pairwise payoff difference.
pub fn consensus_residual(f: &[f64]) -> f64 {
    let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = f.iter().copied().fold(f64::INFINITY, f64::min);
    if f.is_empty() {
        0.0
    } else {
        max - min
    }
}

fn make_row(scenario: &Scenario, time: f64, t: &[f64], x: &[f64]) -> TraceRow {
    let k = scenario.building.room_count();
    let setpoints = scenario.environment.setpoints_at(time);
    let payoffs = payoff(&t[..k], &setpoints);
    let mut full = payoffs.clone();
    full.push(scenario.slack_payoff);
    TraceRow {
        time,
        temperatures: t.to_vec(),
        objective: objective_value(&t[..k], &setpoints),
        setpoints,
        allocation: x.to_vec(),
        escort: scenario.geometry.escort_of(x),
        residual: consensus_residual(&full),
        payoffs,
    }
}

/// Runs the closed loop from the initial state to the horizon.
///
/// Each tick records the state, then advances the allocation by the
/// controller (optionally in substeps against the frozen payoffs) and the
/// temperatures by one Euler step driven by the pre-update allocation.
pub fn run(scenario: &Scenario) -> Result<Trace, SimError> {
    let k = scenario.building.room_count();
    let zones = scenario.building.zone_count();
    let steps = scenario.steps();
    let spec = &scenario.controller;
    let dt = scenario.dt;
    let h = dt / spec.substeps as f64;
    let mut trace = Trace {
        rooms: k,
        zones,
        dt,
        slack_payoff: scenario.slack_payoff,
        rows: Vec::with_capacity(steps + 1),
    };
    let abort = |step: usize, cause: AbortCause, trace: Trace| SimError::Aborted {
        step,
        time: step as f64 * dt,
        cause,
        partial: Box::new(trace),
    };

    let mut t = scenario.initial_temperatures.clone();
    let mut x = match PopulationState::new(&scenario.geometry, scenario.initial_allocation.clone())
    {
        Ok(x) => x,
        Err(e) => return Err(abort(0, e.into(), trace)),
    };
    for step in 0..=steps {
        let time = step as f64 * dt;
        let row = make_row(scenario, time, &t, x.values());
        let mut full = row.payoffs.clone();
        full.push(scenario.slack_payoff);
        trace.rows.push(row);
        if step == steps {
            break;
        }
        let f = match PayoffVector::new(full) {
            Ok(f) => f,
            Err(e) => return Err(abort(step, e.into(), trace)),
        };

        let mut next = x.clone();
        let mut breach = None;
        for _ in 0..spec.substeps {
            let v = match spec.velocity(&next, &f, &scenario.graph) {
                Ok(v) => v,
                Err(e) => return Err(abort(step, e.into(), trace)),
            };
            let candidate: Vec<f64> = next
                .values()
                .iter()
                .zip(&v)
                .map(|(xi, vi)| xi + h * spec.gain * vi)
                .collect();
            match PopulationState::new(&scenario.geometry, candidate.clone()) {
                Ok(s) => next = s,
                Err(e) => {
                    breach = Some((candidate, e));
                    break;
                }
            }
        }

        let ambient = scenario.environment.ambient_at(time);
        let d = scenario.environment.disturbances_at(time, zones);
        t = match scenario
            .building
            .step(&t, ambient, &x.values()[..k], &d, dt)
        {
            Ok(t) => t,
            Err(e) => return Err(abort(step + 1, e.into(), trace)),
        };
        if let Some((raw, e)) = breach {
            trace
                .rows
                .push(make_row(scenario, (step + 1) as f64 * dt, &t, &raw));
            return Err(abort(step + 1, e.into(), trace));
        }
        x = next;
    }
    Ok(trace)
}

/// Thresholds for the empirical rest-point checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticThresholds {
    /// Temperature error (°C, max norm) below which a row counts as at rest.
    pub temperature: f64,
    /// Allocation rate (kW per hour, max norm) expected at rest.
    pub allocation_rate: f64,
}

impl Default for DiagnosticThresholds {
    fn default() -> Self {
        Self {
            temperature: 1e-4,
            allocation_rate: 1e-2,
        }
    }
}

/// Rest-point estimate and error coordinates along a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumDiagnostics {
    /// First row of the averaging window.
    pub window_start: usize,
    pub rest_temperatures: Vec<f64>,
    pub rest_allocation: Vec<f64>,
    pub rest_payoffs: Vec<f64>,
    /// Max-norm of `t - t*` per row.
    pub temperature_error: Vec<f64>,
    /// Max-norm of `x - x*` per row.
    pub allocation_error: Vec<f64>,
    /// Max-norm of `f - f*` per row.
    pub payoff_error: Vec<f64>,
    /// Max-norm of the finite-difference allocation rate per row.
    pub allocation_rate: Vec<f64>,
    /// Length of the final stretch during which the temperature error stays below threshold.
    pub rows_at_rest: usize,
    /// Whether the allocation rate is small throughout that stretch.
    pub velocity_vanishes_at_rest: bool,
    /// `|Σx* - total|`.
    pub rest_mass_error: f64,
    /// Whether the rest allocation carries the full budget within `1e-9·total`.
    pub rest_mass_conserved: bool,
}

pub fn diagnostics(
    trace: &Trace,
    window: f64,
    geometry: &BoundedSimplex,
) -> Result<EquilibriumDiagnostics, SimError> {
    diagnostics_with(trace, window, geometry, DiagnosticThresholds::default())
}

pub fn diagnostics_with(
    trace: &Trace,
    window: f64,
    geometry: &BoundedSimplex,
    thresholds: DiagnosticThresholds,
) -> Result<EquilibriumDiagnostics, SimError> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(SimError::Window(window));
    }
    let rows = &trace.rows;
    if rows.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    let len = rows.len();
    let count = ((len as f64 * window).ceil() as usize).clamp(1, len);
    let start = len - count;
    let tail = &rows[start..];
    let mean = |pick: &dyn Fn(&TraceRow) -> &Vec<f64>| -> Vec<f64> {
        let width = pick(&tail[0]).len();
        (0..width)
            .map(|i| tail.iter().map(|r| pick(r)[i]).sum::<f64>() / tail.len() as f64)
            .collect()
    };
    let rest_temperatures = mean(&|r| &r.temperatures);
    let rest_allocation = mean(&|r| &r.allocation);
    let rest_payoffs = mean(&|r| &r.payoffs);
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let temperature_error: Vec<f64> = rows
        .iter()
        .map(|r| dist(&r.temperatures, &rest_temperatures))
        .collect();
    let allocation_error = rows
        .iter()
        .map(|r| dist(&r.allocation, &rest_allocation))
        .collect();
    let payoff_error = rows
        .iter()
        .map(|r| dist(&r.payoffs, &rest_payoffs))
        .collect();
    let allocation_rate: Vec<f64> = (0..len)
        .map(|i| {
            let (a, b) = if i + 1 < len {
                (i, i + 1)
            } else if i > 0 {
                (i - 1, i)
            } else {
                return 0.0;
            };
            dist(&rows[b].allocation, &rows[a].allocation) / (rows[b].time - rows[a].time)
        })
        .collect();
    // Rows after the temperatures last left the threshold around the rest point.
    let settled_from = temperature_error
        .iter()
        .rposition(|&e| e > thresholds.temperature)
        .map_or(0, |i| i + 1);
    let velocity_vanishes_at_rest = allocation_rate[settled_from..]
        .iter()
        .all(|&r| r <= thresholds.allocation_rate);
    let rest_mass_error = (rest_allocation.iter().sum::<f64>() - geometry.total()).abs();
    Ok(EquilibriumDiagnostics {
        window_start: start,
        rest_temperatures,
        rest_allocation,
        rest_payoffs,
        temperature_error,
        allocation_error,
        payoff_error,
        allocation_rate,
        rows_at_rest: len - settled_from,
        velocity_vanishes_at_rest,
        rest_mass_error,
        rest_mass_conserved: rest_mass_error <= geometry.tolerance(),
    })
}
