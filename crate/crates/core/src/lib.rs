//! Escort evolutionary dynamics for distributing a fixed power budget among
//! the rooms of a building.
//!
//! The crate couples a thermal RC network ([`thermal`]) with allocation
//! dynamics on a bounded simplex ([`population`], [`controllers`]) exchanged
//! over a communication graph ([`graph`]), runs the closed loop
//! ([`simulation`]) and summarizes the outcome ([`metrics`]).

pub mod artifacts;
pub mod controllers;
pub mod graph;
pub mod metrics;
pub mod population;
pub mod scenario;
pub mod simulation;
pub mod thermal;

pub use controllers::{ControllerKind, ControllerSpec, DipParams, PayoffVector};
pub use graph::{CommGraph, Topology};
pub use population::{BoundedSimplex, PopulationState};
pub use scenario::{Overrides, ScenarioFile};
pub use simulation::{run, Scenario, Trace};
pub use thermal::{BuildingNetwork, EnvironmentProfiles, Profile};
