#![allow(dead_code)]

use std::path::PathBuf;

use escort_hvac::scenario::{random_interior, ScenarioFile};
use escort_hvac::{BoundedSimplex, CommGraph, ControllerKind, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn load(name: &str) -> ScenarioFile {
    ScenarioFile::load(&scenario_path(name)).expect("shipped scenario parses")
}

pub fn scenario(name: &str, kind: ControllerKind) -> Scenario {
    load(name)
        .scenario(kind)
        .expect("shipped scenario is valid")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Geometry with `n` strategies whose total lies between `min_total` and roughly 50x that.
pub fn random_geometry(rng: &mut ChaCha8Rng, n: usize, min_total: f64) -> BoundedSimplex {
    let scale = min_total * rng.gen_range(5.0..50.0);
    let lower: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(0.0..0.5)).collect();
    let upper: Vec<f64> = lower
        .iter()
        .map(|lo| lo + scale * rng.gen_range(0.5..2.0))
        .collect();
    let lo_sum: f64 = lower.iter().sum();
    let up_sum: f64 = upper.iter().sum();
    let total = lo_sum + rng.gen_range(0.2..0.8) * (up_sum - lo_sum);
    BoundedSimplex::new(lower, upper, total).expect("constructed geometry is valid")
}

pub fn random_state(rng: &mut ChaCha8Rng, geometry: &BoundedSimplex) -> Vec<f64> {
    random_interior(geometry, rng.gen()).expect("interior exists")
}

/// Moves component `i` onto its lower (or upper) bound and spreads the
/// released mass over the other components without leaving the box.
pub fn pin(geometry: &BoundedSimplex, x: &[f64], i: usize, upper: bool) -> Option<Vec<f64>> {
    let mut out = x.to_vec();
    let target = if upper {
        geometry.upper()[i]
    } else {
        geometry.lower()[i]
    };
    let mut excess = out[i] - target;
    out[i] = target;
    for _ in 0..64 {
        for j in (0..x.len()).filter(|&j| j != i) {
            let room = if excess > 0.0 {
                geometry.upper()[j] - out[j]
            } else {
                geometry.lower()[j] - out[j]
            };
            let moved = if excess > 0.0 {
                excess.min(room * 0.5)
            } else {
                excess.max(room * 0.5)
            };
            out[j] += moved;
            excess -= moved;
        }
    }
    (excess.abs() <= 1e-12 * geometry.total()).then_some(out)
}

pub fn random_payoffs(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-spread..spread)).collect()
}

/// Random spanning tree plus extra edges.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> CommGraph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    let density = rng.gen_range(0.0..0.5);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                edges.push((i, j));
            }
        }
    }
    CommGraph::from_edges(n, &edges).expect("spanning tree is connected")
}

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}
