//! Scenario documents (TOML) and their conversion into runnable scenarios.
//!
//! Room, zone and node ids are 1-based in the document.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::controllers::{ControllerKind, ControllerSpec, DipParams};
use crate::graph::{CommGraph, Topology};
use crate::population::{BoundedSimplex, PopulationState};
use crate::simulation::{check_initial_allocation, Scenario};
use crate::thermal::{
    BuildingNetwork, CorridorLayout, EnvironmentProfiles, Profile, Zone, ZoneKind,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("`{0}` is required")]
    Missing(&'static str),
    #[error("`{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl ToString) -> SchemaError {
    SchemaError::Invalid {
        field: field.into(),
        message: message.to_string(),
    }
}

/// A number or one number per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spread {
    One(f64),
    Each(Vec<f64>),
}

impl Spread {
    fn expand(&self, n: usize, field: &str) -> Result<Vec<f64>, SchemaError> {
        match self {
            Self::One(v) => Ok(vec![*v; n]),
            Self::Each(v) if v.len() == n => Ok(v.clone()),
            Self::Each(v) => Err(invalid(
                field,
                format!("expected {n} values, got {}", v.len()),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneEntry {
    pub kind: ZoneKind,
    pub capacitance: f64,
    #[serde(default)]
    pub ambient_conductance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingSection {
    /// `corridor` (generated) or `explicit`.
    pub layout: Option<String>,
    pub rooms: Option<usize>,
    pub room_capacitance: Option<f64>,
    pub interior_wall_capacitance: Option<f64>,
    pub exterior_wall_capacitance: Option<f64>,
    pub room_wall_conductance: Option<f64>,
    pub wall_ambient_conductance: Option<f64>,
    /// Explicit layout: rooms first, then walls.
    pub zones: Option<Vec<ZoneEntry>>,
    /// Explicit layout: `[i, j, α]` with 1-based zone ids.
    pub conductances: Option<Vec<(usize, usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileGroup {
    /// Inclusive 1-based range `[first, last]`.
    pub range: (usize, usize),
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesSection {
    pub ambient: Option<Vec<(f64, f64)>>,
    pub setpoints: Option<Vec<ProfileGroup>>,
    #[serde(default)]
    pub disturbances: Vec<ProfileGroup>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub lower: Option<Spread>,
    pub upper: Option<Spread>,
    pub total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SlackLinks {
    Nodes(Vec<usize>),
    Named(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    /// `ring`, `path`, `complete` or `custom`.
    pub topology: Option<String>,
    /// Room-to-room edges for `custom`.
    pub edges: Option<Vec<(usize, usize)>>,
    /// Rooms linked to the slack node, or `"all"`. Defaults to room 1.
    pub slack_links: Option<SlackLinks>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindValues {
    pub ded: Option<f64>,
    pub ed: Option<f64>,
    pub dip: Option<f64>,
}

impl KindValues {
    fn get(&self, kind: ControllerKind) -> Option<f64> {
        match kind {
            ControllerKind::Ded => self.ded,
            ControllerKind::Ed => self.ed,
            ControllerKind::Dip => self.dip,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: Option<ControllerKind>,
    pub gain: Option<f64>,
    /// Per-kind gains, taking precedence over `gain`.
    #[serde(default)]
    pub gains: KindValues,
    pub epsilon: Option<f64>,
    pub substeps: Option<usize>,
    #[serde(default)]
    pub slack_payoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialAllocation {
    /// Same value in every room; the slack takes the remainder.
    PerRoom(f64),
    /// One value per room (slack takes the remainder) or per strategy including the slack.
    Vector(Vec<f64>),
    /// `uniform` or `random`.
    Policy(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub initial_room_temperature: Option<f64>,
    /// Defaults to the room value.
    pub initial_wall_temperature: Option<f64>,
    /// Full per-zone vector, overriding the two scalars.
    pub initial_temperatures: Option<Vec<f64>>,
    pub initial_allocation: Option<InitialAllocation>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub building: BuildingSection,
    #[serde(default)]
    pub profiles: ProfilesSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Command-line overrides applied on top of a document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub controller: Option<ControllerKind>,
    pub seed: Option<u64>,
}

/// Outcome of a single static check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let file: Self = toml::from_str(text).map_err(|e| SchemaError::Parse(e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    file.schema_version
                ),
            ));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(dt) = overrides.dt {
            self.run.dt = Some(dt);
        }
        if let Some(h) = overrides.horizon {
            self.run.horizon = Some(h);
        }
        if let Some(kind) = overrides.controller {
            self.controller.kind = Some(kind);
        }
        if let Some(seed) = overrides.seed {
            self.run.seed = seed;
        }
    }

    pub fn controller_kind(&self) -> ControllerKind {
        self.controller.kind.unwrap_or(ControllerKind::Ded)
    }

    /// Hash of everything except the controller kind, so runs of different
    /// controllers on the same setup share it.
    pub fn fingerprint(&self) -> String {
        let mut copy = self.clone();
        copy.controller.kind = None;
        let json = serde_json::to_string(&copy).expect("scenario serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn building(&self) -> Result<BuildingNetwork, SchemaError> {
        let b = &self.building;
        match b.layout.as_deref().unwrap_or("corridor") {
            "corridor" => {
                let rooms = b.rooms.ok_or(SchemaError::Missing("building.rooms"))?;
                if rooms == 0 {
                    return Err(invalid("building.rooms", "must be at least 1"));
                }
                let mut layout = CorridorLayout::new(rooms);
                if let Some(v) = b.room_capacitance {
                    layout.room_capacitance = v;
                }
                if let Some(v) = b.interior_wall_capacitance {
                    layout.interior_wall_capacitance = v;
                }
                layout.exterior_wall_capacitance = b
                    .exterior_wall_capacitance
                    .unwrap_or(layout.interior_wall_capacitance);
                if let Some(v) = b.room_wall_conductance {
                    layout.room_wall_conductance = v;
                }
                if let Some(v) = b.wall_ambient_conductance {
                    layout.wall_ambient_conductance = v;
                }
                BuildingNetwork::corridor(&layout).map_err(|e| invalid("building", e))
            }
            "explicit" => {
                let zones = b
                    .zones
                    .as_ref()
                    .ok_or(SchemaError::Missing("building.zones"))?;
                let n = zones.len();
                let mut c = vec![0.0; n * n];
                for &(i, j, a) in b.conductances.as_deref().unwrap_or(&[]) {
                    if i == 0 || j == 0 || i > n || j > n {
                        return Err(invalid(
                            "building.conductances",
                            format!("zone pair ({i}, {j}) out of range"),
                        ));
                    }
                    c[(i - 1) * n + (j - 1)] = a;
                    c[(j - 1) * n + (i - 1)] = a;
                }
                let zones = zones
                    .iter()
                    .map(|z| Zone {
                        kind: z.kind,
                        capacitance: z.capacitance,
                        ambient_conductance: z.ambient_conductance,
                    })
                    .collect();
                BuildingNetwork::new(zones, c).map_err(|e| invalid("building", e))
            }
            other => Err(invalid(
                "building.layout",
                format!("unknown layout `{other}` (expected corridor or explicit)"),
            )),
        }
    }

    pub fn environment(
        &self,
        rooms: usize,
        zones: usize,
    ) -> Result<EnvironmentProfiles, SchemaError> {
        let p = &self.profiles;
        let ambient = p
            .ambient
            .clone()
            .ok_or(SchemaError::Missing("profiles.ambient"))?;
        let ambient = Profile::new(ambient).map_err(|e| invalid("profiles.ambient", e))?;
        let groups = p
            .setpoints
            .as_ref()
            .ok_or(SchemaError::Missing("profiles.setpoints"))?;
        let setpoints = spread_groups(groups, rooms, "profiles.setpoints", true)?;
        let disturbances = if p.disturbances.is_empty() {
            Vec::new()
        } else {
            spread_groups(&p.disturbances, zones, "profiles.disturbances", false)?
        };
        Ok(EnvironmentProfiles {
            ambient,
            setpoints,
            disturbances,
        })
    }

    /// Raw bound vectors (rooms then slack) and the total.
    fn bound_vectors(&self, rooms: usize) -> Result<(Vec<f64>, Vec<f64>, f64), SchemaError> {
        let total = self
            .bounds
            .total
            .ok_or(SchemaError::Missing("bounds.total"))?;
        let mut lower = match &self.bounds.lower {
            Some(s) => s.expand(rooms, "bounds.lower")?,
            None => vec![0.0; rooms],
        };
        let mut upper = self
            .bounds
            .upper
            .as_ref()
            .ok_or(SchemaError::Missing("bounds.upper"))?
            .expand(rooms, "bounds.upper")?;
        lower.push(0.0);
        upper.push(total);
        Ok((lower, upper, total))
    }

    pub fn geometry(&self, rooms: usize) -> Result<BoundedSimplex, SchemaError> {
        let (lower, upper, total) = self.bound_vectors(rooms)?;
        BoundedSimplex::new(lower, upper, total).map_err(|e| invalid("bounds", e))
    }

    pub fn graph(&self, rooms: usize) -> Result<CommGraph, SchemaError> {
        let g = &self.graph;
        let name = g.topology.as_deref().unwrap_or("ring");
        let topology = match name {
            "ring" => Topology::Ring,
            "path" => Topology::Path,
            "complete" => Topology::Complete,
            "custom" => {
                Topology::Custom(g.edges.clone().ok_or(SchemaError::Missing("graph.edges"))?)
            }
            other => {
                return Err(invalid(
                    "graph.topology",
                    format!("unknown topology `{other}`"),
                ))
            }
        };
        let links: Vec<usize> = match &g.slack_links {
            None => vec![0],
            Some(SlackLinks::Named(s)) if s == "all" => (0..rooms).collect(),
            Some(SlackLinks::Named(s)) => {
                return Err(invalid(
                    "graph.slack_links",
                    format!("expected a list of rooms or \"all\", got `{s}`"),
                ))
            }
            Some(SlackLinks::Nodes(list)) => {
                if let Some(&bad) = list.iter().find(|&&r| r == 0 || r > rooms) {
                    return Err(invalid(
                        "graph.slack_links",
                        format!("room {bad} out of range"),
                    ));
                }
                list.iter().map(|r| r - 1).collect()
            }
        };
        let base = if rooms >= 2 {
            CommGraph::build(&topology, rooms).map_err(|e| invalid("graph", e))?
        } else {
            if !matches!(
                topology,
                Topology::Ring | Topology::Path | Topology::Complete
            ) {
                return Err(invalid(
                    "graph.edges",
                    "a single room has no room-to-room edges",
                ));
            }
            return CommGraph::from_edges(2, &[(0, 1)]).map_err(|e| invalid("graph", e));
        };
        base.with_hub(&links).map_err(|e| invalid("graph", e))
    }

    pub fn controller(&self, kind: ControllerKind) -> Result<ControllerSpec, SchemaError> {
        let c = &self.controller;
        let gain = c.gains.get(kind).or(c.gain).unwrap_or(1.0);
        let mut spec =
            ControllerSpec::new(kind, gain).map_err(|e| invalid("controller.gain", e))?;
        spec = spec
            .with_substeps(c.substeps.unwrap_or(1))
            .map_err(|e| invalid("controller.substeps", e))?;
        let dip = DipParams::new(c.epsilon.unwrap_or(0.05))
            .map_err(|e| invalid("controller.epsilon", e))?;
        Ok(spec.with_dip(dip))
    }

    pub fn initial_temperatures(
        &self,
        rooms: usize,
        zones: usize,
    ) -> Result<Vec<f64>, SchemaError> {
        let r = &self.run;
        if let Some(v) = &r.initial_temperatures {
            if v.len() != zones {
                return Err(invalid(
                    "run.initial_temperatures",
                    format!("expected {zones} values, got {}", v.len()),
                ));
            }
            return Ok(v.clone());
        }
        let room = r
            .initial_room_temperature
            .ok_or(SchemaError::Missing("run.initial_room_temperature"))?;
        let wall = r.initial_wall_temperature.unwrap_or(room);
        Ok((0..zones)
            .map(|i| if i < rooms { room } else { wall })
            .collect())
    }

    /// Initial allocation including the slack. Not checked for feasibility.
    pub fn initial_allocation(&self, geometry: &BoundedSimplex) -> Result<Vec<f64>, SchemaError> {
        let n = geometry.len();
        let rooms = n - 1;
        let total = geometry.total();
        let with_slack = |mut v: Vec<f64>| {
            let used: f64 = v.iter().sum();
            v.push(total - used);
            v
        };
        match self
            .run
            .initial_allocation
            .as_ref()
            .unwrap_or(&InitialAllocation::Policy("uniform".into()))
        {
            InitialAllocation::PerRoom(v) => Ok(with_slack(vec![*v; rooms])),
            InitialAllocation::Vector(v) if v.len() == rooms => Ok(with_slack(v.clone())),
            InitialAllocation::Vector(v) if v.len() == n => Ok(v.clone()),
            InitialAllocation::Vector(v) => Err(invalid(
                "run.initial_allocation",
                format!("expected {rooms} or {n} values, got {}", v.len()),
            )),
            InitialAllocation::Policy(p) if p == "uniform" => Ok(vec![total / n as f64; n]),
            InitialAllocation::Policy(p) if p == "random" => {
                random_interior(geometry, self.run.seed).ok_or_else(|| {
                    invalid(
                        "run.initial_allocation",
                        "no interior point for a random start",
                    )
                })
            }
            InitialAllocation::Policy(p) => Err(invalid(
                "run.initial_allocation",
                format!("unknown policy `{p}` (expected uniform or random)"),
            )),
        }
    }

    fn required_run(&self) -> Result<(f64, f64), SchemaError> {
        let horizon = self
            .run
            .horizon
            .ok_or(SchemaError::Missing("run.horizon"))?;
        let dt = self.run.dt.unwrap_or(0.01);
        Ok((horizon, dt))
    }

    /// Builds a runnable scenario for the given controller kind.
    pub fn scenario(&self, kind: ControllerKind) -> Result<Scenario, SchemaError> {
        let building = self.building()?;
        let (rooms, zones) = (building.room_count(), building.zone_count());
        let environment = self.environment(rooms, zones)?;
        let geometry = self.geometry(rooms)?;
        let graph = self.graph(rooms)?;
        let controller = self.controller(kind)?;
        let (horizon, dt) = self.required_run()?;
        let initial_temperatures = self.initial_temperatures(rooms, zones)?;
        let initial_allocation = self.initial_allocation(&geometry)?;
        let scenario = Scenario {
            building,
            environment,
            geometry,
            graph,
            controller,
            horizon,
            dt,
            initial_temperatures,
            initial_allocation,
            slack_payoff: self.controller.slack_payoff,
        };
        scenario.validate().map_err(|e| invalid("scenario", e))?;
        Ok(scenario)
    }

    /// Static checks without running anything: connectivity, bound geometry,
    /// the initial resource constraint and step-size stability.
    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        let mut push = |name: &str, result: Result<String, String>| {
            let (passed, detail) = match result {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            out.push(Check {
                name: name.to_owned(),
                passed,
                detail,
            });
        };
        let building = self.building();
        push(
            "building",
            building
                .as_ref()
                .map(|b| format!("{} zones, {} rooms", b.zone_count(), b.room_count()))
                .map_err(|e| e.to_string()),
        );
        let Ok(building) = building else { return out };
        let rooms = building.room_count();
        push(
            "profiles",
            self.environment(rooms, building.zone_count())
                .map(|_| "ok".to_owned())
                .map_err(|e| e.to_string()),
        );
        let graph = self.graph(rooms);
        push(
            "connectivity",
            graph
                .as_ref()
                .map(|g| format!("{} nodes connected", g.node_count()))
                .map_err(|e| e.to_string()),
        );
        let vectors = self.bound_vectors(rooms);
        let geometry = self.geometry(rooms);
        match &vectors {
            Ok((lower, upper, total)) => {
                let sigma_lo = total - lower.iter().sum::<f64>();
                let sigma_up = total - upper.iter().sum::<f64>();
                let describe = format!("sigma_lo = {sigma_lo}, sigma_up = {sigma_up}");
                let ok = geometry.is_ok() && sigma_lo > 0.0 && sigma_up < 0.0;
                push(
                    "bounds",
                    if ok {
                        Ok(describe)
                    } else {
                        Err(geometry.as_ref().err().map_or(describe, |e| e.to_string()))
                    },
                );
            }
            Err(e) => push("bounds", Err(e.to_string())),
        }
        let controller = self.controller(self.controller_kind());
        push(
            "controller",
            controller
                .as_ref()
                .map(|c| format!("{} gain {}", c.kind, c.gain))
                .map_err(|e| e.to_string()),
        );
        let run = self.required_run();
        push(
            "run",
            run.as_ref()
                .map(|(h, dt)| format!("horizon {h} h, dt {dt} h"))
                .map_err(|e| e.to_string()),
        );
        push(
            "initial_temperatures",
            self.initial_temperatures(rooms, building.zone_count())
                .map(|_| "ok".to_owned())
                .map_err(|e| e.to_string()),
        );

        if let Ok((lower, upper, total)) = &vectors {
            let x0 = match &geometry {
                Ok(g) => self.initial_allocation(g),
                Err(_) => Err(invalid("bounds", "unusable")),
            };
            match x0 {
                Ok(x) => {
                    let sum: f64 = x.iter().sum();
                    let tol = 1e-9 * total.abs();
                    push(
                        "resource_constraint",
                        if (sum - total).abs() <= tol {
                            Ok(format!("sum of initial allocation = {sum}"))
                        } else {
                            Err(format!(
                                "sum of initial allocation is {sum}, expected {total}"
                            ))
                        },
                    );
                    let outside: Vec<String> = x
                        .iter()
                        .zip(lower.iter().zip(upper))
                        .enumerate()
                        .filter(|(_, (&v, (&lo, &up)))| !(v > lo && v < up))
                        .map(|(i, _)| (i + 1).to_string())
                        .collect();
                    push(
                        "interior_start",
                        if outside.is_empty() {
                            Ok("every strategy strictly inside its bounds".to_owned())
                        } else {
                            Err(format!(
                                "strategies on or outside bounds: {}",
                                outside.join(", ")
                            ))
                        },
                    );
                    if let (Ok(g), Ok(graph), Ok(spec), Ok((_, dt))) =
                        (&geometry, &graph, &controller, &run)
                    {
                        if check_initial_allocation(g, &x).is_ok() {
                            push(
                                "controller_step",
                                controller_stability(g, graph, spec, &x, *dt),
                            );
                        }
                    }
                }
                Err(e) => push("resource_constraint", Err(e.to_string())),
            }
        }
        if let Ok((_, dt)) = run {
            let rate = building.fastest_rate();
            let ratio = dt * rate;
            push(
                "thermal_step",
                if ratio < 1.0 {
                    Ok(format!("dt * fastest thermal rate = {ratio:.4} < 1"))
                } else {
                    Err(format!("dt * fastest thermal rate = {ratio:.4} >= 1, explicit Euler will oscillate"))
                },
            );
        }
        out
    }
}

/// Linearized explicit-Euler margin of the consensus part of the dynamics at
/// the initial allocation: `gain * h * λ_max < 2`.
fn controller_stability(
    geometry: &BoundedSimplex,
    graph: &CommGraph,
    spec: &ControllerSpec,
    x: &[f64],
    dt: f64,
) -> Result<String, String> {
    let h = dt / spec.substeps as f64;
    let phi = geometry.escort_of(x);
    let n = x.len();
    let weighted = |complete: bool| {
        let mut l = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j && (complete || graph.has_edge(i, j)) {
                    let w = phi[i] * phi[j];
                    l[(i, j)] = -w;
                    l[(i, i)] += w;
                }
            }
        }
        l
    };
    let lambda = match spec.kind {
        ControllerKind::Ded => max_eigenvalue(weighted(false)),
        ControllerKind::Ed => max_eigenvalue(weighted(true)) / phi.iter().sum::<f64>(),
        ControllerKind::Dip => max_eigenvalue(graph.laplacian()),
    };
    let margin = spec.gain * h * lambda;
    if margin < 2.0 {
        Ok(format!("gain * h * lambda_max = {margin:.4} < 2"))
    } else {
        Err(format!(
            "gain * h * lambda_max = {margin:.4} >= 2, the allocation update is unstable"
        ))
    }
}

fn max_eigenvalue(m: DMatrix<f64>) -> f64 {
    m.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

fn spread_groups(
    groups: &[ProfileGroup],
    n: usize,
    field: &str,
    cover: bool,
) -> Result<Vec<Profile>, SchemaError> {
    let mut out: Vec<Option<Profile>> = vec![None; n];
    for (g, group) in groups.iter().enumerate() {
        let (first, last) = group.range;
        let here = format!("{field}[{g}]");
        if first == 0 || first > last || last > n {
            return Err(invalid(
                format!("{here}.range"),
                format!("[{first}, {last}] is not within 1..={n}"),
            ));
        }
        let profile =
            Profile::new(group.points.clone()).map_err(|e| invalid(format!("{here}.points"), e))?;
        for slot in &mut out[first - 1..last] {
            if slot.is_some() {
                return Err(invalid(
                    format!("{here}.range"),
                    "overlaps an earlier group",
                ));
            }
            *slot = Some(profile.clone());
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(i, p)| match p {
            Some(p) => Ok(p),
            None if cover => Err(invalid(field, format!("entry {} has no profile", i + 1))),
            None => Ok(Profile::constant(0.0)),
        })
        .collect()
}

/// Random interior point: a seeded step from the uniform split along a
/// zero-sum direction, kept within 90% of the distance to the nearest bound.
pub fn random_interior(geometry: &BoundedSimplex, seed: u64) -> Option<Vec<f64>> {
    let n = geometry.len();
    let center: Vec<f64> = geometry
        .lower()
        .iter()
        .zip(geometry.upper())
        .map(|(lo, up)| lo + (up - lo) * 0.5)
        .collect();
    // Shift the box midpoints onto the constraint plane.
    let base = PopulationState::new(geometry, project_mass(geometry, &center)?).ok()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let dir: Vec<f64> = raw.iter().map(|v| v - mean).collect();
    let x = base.values();
    let mut reach = f64::INFINITY;
    for i in 0..n {
        let room = if dir[i] > 0.0 {
            (geometry.upper()[i] - x[i]) / dir[i]
        } else if dir[i] < 0.0 {
            (geometry.lower()[i] - x[i]) / dir[i]
        } else {
            continue;
        };
        reach = reach.min(room);
    }
    let step = 0.9 * reach * rng.gen_range(0.0..1.0);
    Some(x.iter().zip(&dir).map(|(xi, d)| xi + step * d).collect())
}

/// Moves a point inside the box onto `Σx = total` by scaling toward the
/// lower or upper corner.
fn project_mass(geometry: &BoundedSimplex, point: &[f64]) -> Option<Vec<f64>> {
    let sum: f64 = point.iter().sum();
    let total = geometry.total();
    let (lo, up) = (geometry.lower(), geometry.upper());
    let out: Vec<f64> = if sum > total {
        let s = (total - lo.iter().sum::<f64>()) / (sum - lo.iter().sum::<f64>());
        point.iter().zip(lo).map(|(p, l)| l + s * (p - l)).collect()
    } else {
        let s = (up.iter().sum::<f64>() - total) / (up.iter().sum::<f64>() - sum);
        point.iter().zip(up).map(|(p, u)| u - s * (u - p)).collect()
    };
    out.iter().all(|v| v.is_finite()).then_some(out)
}
