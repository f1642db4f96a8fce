//! Building thermal network, environment profiles and the tracking objective.
//!
//! Time is in hours, energy in kWh, temperature in °C.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermalError {
    #[error("{what}: expected length {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("zone {zone}: capacitance must be positive, got {value}")]
    Capacitance { zone: usize, value: f64 },
    #[error("conductance between zones {i} and {j} is invalid: {reason}")]
    Conductance {
        i: usize,
        j: usize,
        reason: &'static str,
    },
    #[error("zone {zone}: ambient conductance must be nonnegative, got {value}")]
    AmbientConductance { zone: usize, value: f64 },
    #[error("rooms must precede walls; zone {0} is a room after a wall")]
    ZoneOrder(usize),
    #[error("thermal network is disconnected: zone {0} has no heat path to the others")]
    Disconnected(usize),
    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),
    #[error("profile breakpoints must be strictly increasing in time (breakpoint {0})")]
    Breakpoints(usize),
    #[error("profile needs at least one breakpoint")]
    EmptyProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneKind {
    Room,
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub kind: ZoneKind,
    /// kWh/°C
    pub capacitance: f64,
    /// kW/°C toward the ambient
    pub ambient_conductance: f64,
}

impl Zone {
    pub fn room(capacitance: f64) -> Self {
        Self {
            kind: ZoneKind::Room,
            capacitance,
            ambient_conductance: 0.0,
        }
    }

    pub fn wall(capacitance: f64, ambient_conductance: f64) -> Self {
        Self {
            kind: ZoneKind::Wall,
            capacitance,
            ambient_conductance,
        }
    }

    /// Whether the zone receives actuator power and disturbances.
    pub fn is_actuated(&self) -> bool {
        self.kind == ZoneKind::Room
    }
}

/// Parameters of the corridor layout: rooms in a row, an interior wall
/// between each adjacent pair and one exterior wall per room.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorLayout {
    pub rooms: usize,
    pub room_capacitance: f64,
    pub interior_wall_capacitance: f64,
    pub exterior_wall_capacitance: f64,
    pub room_wall_conductance: f64,
    pub wall_ambient_conductance: f64,
}

impl CorridorLayout {
    pub fn new(rooms: usize) -> Self {
        Self {
            rooms,
            room_capacitance: 2.5,
            interior_wall_capacitance: 5.0,
            exterior_wall_capacitance: 5.0,
            room_wall_conductance: 0.5,
            wall_ambient_conductance: 0.3,
        }
    }
}

/// Zones (rooms first, then walls) with a symmetric conductance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingNetwork {
    zones: Vec<Zone>,
    rooms: usize,
    /// Row-major N×N.
    conductance: Vec<f64>,
    /// Sparse view of the positive entries: (i, j, α) for every ordered pair.
    links: Vec<Vec<(usize, f64)>>,
}

impl BuildingNetwork {
    /// `conductance` is row-major N×N.
    pub fn new(zones: Vec<Zone>, conductance: Vec<f64>) -> Result<Self, ThermalError> {
        let n = zones.len();
        if conductance.len() != n * n {
            return Err(ThermalError::Dimension {
                what: "conductance matrix",
                expected: n * n,
                actual: conductance.len(),
            });
        }
        let mut rooms = 0;
        let mut seen_wall = false;
        for (i, z) in zones.iter().enumerate() {
            if !(z.capacitance > 0.0 && z.capacitance.is_finite()) {
                return Err(ThermalError::Capacitance {
                    zone: i + 1,
                    value: z.capacitance,
                });
            }
            if !(z.ambient_conductance >= 0.0 && z.ambient_conductance.is_finite()) {
                return Err(ThermalError::AmbientConductance {
                    zone: i + 1,
                    value: z.ambient_conductance,
                });
            }
            match z.kind {
                ZoneKind::Room if seen_wall => return Err(ThermalError::ZoneOrder(i + 1)),
                ZoneKind::Room => rooms += 1,
                ZoneKind::Wall => seen_wall = true,
            }
        }
        let mut links = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                let a = conductance[i * n + j];
                let bad = |reason| ThermalError::Conductance {
                    i: i + 1,
                    j: j + 1,
                    reason,
                };
                if !a.is_finite() {
                    return Err(bad("not finite"));
                }
                if a < 0.0 {
                    return Err(bad("negative"));
                }
                if i == j && a != 0.0 {
                    return Err(bad("diagonal must be zero"));
                }
                if a != conductance[j * n + i] {
                    return Err(bad("matrix is not symmetric"));
                }
                if a > 0.0 {
                    links[i].push((j, a));
                }
            }
        }
        let net = Self {
            zones,
            rooms,
            conductance,
            links,
        };
        if let Some(z) = net.isolated_zone() {
            return Err(ThermalError::Disconnected(z + 1));
        }
        Ok(net)
    }

    pub fn corridor(layout: &CorridorLayout) -> Result<Self, ThermalError> {
        let k = layout.rooms;
        let interior = k.saturating_sub(1);
        let n = 2 * k + interior;
        let mut zones = vec![Zone::room(layout.room_capacitance); k];
        zones.extend((0..k).map(|_| {
            Zone::wall(
                layout.exterior_wall_capacitance,
                layout.wall_ambient_conductance,
            )
        }));
        zones.extend((0..interior).map(|_| Zone::wall(layout.interior_wall_capacitance, 0.0)));
        let mut c = vec![0.0; n * n];
        let mut link = |i: usize, j: usize| {
            c[i * n + j] = layout.room_wall_conductance;
            c[j * n + i] = layout.room_wall_conductance;
        };
        for i in 0..k {
            link(i, k + i);
        }
        for i in 0..interior {
            link(i, 2 * k + i);
            link(i + 1, 2 * k + i);
        }
        Self::new(zones, c)
    }

    /// First zone not reachable from zone 0 through conduction or a shared ambient.
    fn isolated_zone(&self) -> Option<usize> {
        let n = self.zones.len();
        if n == 0 {
            return None;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut ambient_reached = false;
        while let Some(i) = stack.pop() {
            let mut next: Vec<usize> = self.links[i].iter().map(|&(j, _)| j).collect();
            if self.zones[i].ambient_conductance > 0.0 && !ambient_reached {
                ambient_reached = true;
                next.extend((0..n).filter(|&j| self.zones[j].ambient_conductance > 0.0));
            }
            for j in next {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().position(|s| !s)
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn zone_count(&self) -> usize {
        self.zones.len()
    }

    pub fn room_count(&self) -> usize {
        self.rooms
    }

    pub fn conductance(&self, i: usize, j: usize) -> f64 {
        self.conductance[i * self.zones.len() + j]
    }

    /// Temperature rates for every zone.
    ///
    /// `u` holds one entry per room, `d` one entry per zone (walls ignore it).
    pub fn zone_derivative(
        &self,
        t: &[f64],
        ambient: f64,
        u: &[f64],
        d: &[f64],
    ) -> Result<Vec<f64>, ThermalError> {
        let n = self.zones.len();
        check_len("temperatures", t, n)?;
        check_len("allocations", u, self.rooms)?;
        check_len("disturbances", d, n)?;
        check_finite("temperatures", t)?;
        check_finite("allocations", u)?;
        check_finite("disturbances", d)?;
        if !ambient.is_finite() {
            return Err(ThermalError::NonFinite("ambient"));
        }
        let rates = self
            .zones
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let conduction: f64 = self.links[i].iter().map(|&(j, a)| a * (t[j] - t[i])).sum();
                let mut heat = conduction + z.ambient_conductance * (ambient - t[i]);
                if z.is_actuated() {
                    heat += u[i] + d[i];
                }
                heat / z.capacitance
            })
            .collect();
        Ok(rates)
    }

    /// One explicit Euler step of length `dt`.
    pub fn step(
        &self,
        t: &[f64],
        ambient: f64,
        u: &[f64],
        d: &[f64],
        dt: f64,
    ) -> Result<Vec<f64>, ThermalError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ThermalError::TimeStep(dt));
        }
        let rate = self.zone_derivative(t, ambient, u, d)?;
        Ok(t.iter().zip(&rate).map(|(ti, r)| ti + dt * r).collect())
    }

    /// Σ θ_i t_i, the stored heat relative to 0 °C.
    pub fn stored_heat(&self, t: &[f64]) -> f64 {
        self.zones
            .iter()
            .zip(t)
            .map(|(z, ti)| z.capacitance * ti)
            .sum()
    }

    /// Largest `α_total/θ` over zones. Explicit Euler is monotone when `dt` times
    /// this rate stays below 1.
    pub fn fastest_rate(&self) -> f64 {
        self.zones
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let total: f64 = self.links[i].iter().map(|&(_, a)| a).sum();
                (total + z.ambient_conductance) / z.capacitance
            })
            .fold(0.0, f64::max)
    }
}

fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), ThermalError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(ThermalError::Dimension {
            what,
            expected,
            actual: v.len(),
        })
    }
}

fn check_finite(what: &'static str, v: &[f64]) -> Result<(), ThermalError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ThermalError::NonFinite(what))
    }
}

/// Signed tracking error `t - t_set` per room. Negative means too cold.
pub fn payoff(t: &[f64], setpoints: &[f64]) -> Vec<f64> {
    assert_eq!(
        t.len(),
        setpoints.len(),
        "room temperatures and setpoints differ in length"
    );
    t.iter().zip(setpoints).map(|(a, b)| a - b).collect()
}

/// Half the sum of squared tracking errors.
pub fn objective_value(t: &[f64], setpoints: &[f64]) -> f64 {
    assert_eq!(
        t.len(),
        setpoints.len(),
        "room temperatures and setpoints differ in length"
    );
    t.iter()
        .zip(setpoints)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / 2.0
}

/// Piecewise-linear function of time with constant extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Profile {
    points: Vec<(f64, f64)>,
}

impl Profile {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, ThermalError> {
        if points.is_empty() {
            return Err(ThermalError::EmptyProfile);
        }
        for (i, &(t, v)) in points.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(ThermalError::NonFinite("profile breakpoints"));
            }
            if i > 0 && t <= points[i - 1].0 {
                return Err(ThermalError::Breakpoints(i + 1));
            }
        }
        Ok(Self { points })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            points: vec![(0.0, value)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, time: f64) -> f64 {
        let p = &self.points;
        let first = p[0];
        let last = p[p.len() - 1];
        if time <= first.0 {
            return first.1;
        }
        if time >= last.0 {
            return last.1;
        }
        let idx = p.partition_point(|&(t, _)| t <= time);
        let (t0, v0) = p[idx - 1];
        let (t1, v1) = p[idx];
        v0 + (v1 - v0) * (time - t0) / (t1 - t0)
    }
}

impl TryFrom<Vec<(f64, f64)>> for Profile {
    type Error = ThermalError;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<Profile> for Vec<(f64, f64)> {
    fn from(p: Profile) -> Self {
        p.points
    }
}

/// Ambient temperature, per-room setpoints and per-zone disturbances.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentProfiles {
    pub ambient: Profile,
    pub setpoints: Vec<Profile>,
    /// One per zone; empty means no disturbances.
    pub disturbances: Vec<Profile>,
}

impl EnvironmentProfiles {
    pub fn ambient_at(&self, time: f64) -> f64 {
        self.ambient.eval(time)
    }

    pub fn setpoints_at(&self, time: f64) -> Vec<f64> {
        self.setpoints.iter().map(|p| p.eval(time)).collect()
    }

    pub fn disturbances_at(&self, time: f64, zones: usize) -> Vec<f64> {
        if self.disturbances.is_empty() {
            vec![0.0; zones]
        } else {
            self.disturbances.iter().map(|p| p.eval(time)).collect()
        }
    }
}
