//! Allocation dynamics: centralized escort dynamics (ED), distributed escort
//! dynamics (DED) and the distributed interior-point baseline (DIP).
//!
//! Payoffs are tracking errors `t - t_set`, so mass flows toward strategies
//! with lower payoff under DED: a room that is too cold attracts power.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::CommGraph;
use crate::population::{BoundedSimplex, GeometryError, PopulationState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("{what}: expected length {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite payoff at index {0}")]
    NonFinitePayoff(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("link weights are not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("link weights must be nonnegative with a zero diagonal, entry ({0}, {1}) is invalid")]
    InvalidWeight(usize, usize),
    #[error(
        "strategy {index}: value {value} is outside the open barrier domain ({lower}, {upper})"
    )]
    BarrierDomain {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("barrier weight must be positive and finite, got {0}")]
    Epsilon(f64),
    #[error("controller gain must be positive and finite, got {0}")]
    Gain(f64),
    #[error("controller substeps must be at least 1")]
    Substeps,
}

/// Signed payoffs, one per strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffVector(Vec<f64>);

impl PayoffVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ControllerError> {
        match values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(ControllerError::NonFinitePayoff(i)),
            None => Ok(Self(values)),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Barrier weight of the interior-point baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipParams {
    epsilon: f64,
}

impl DipParams {
    pub fn new(epsilon: f64) -> Result<Self, ControllerError> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(Self { epsilon })
        } else {
            Err(ControllerError::Epsilon(epsilon))
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for DipParams {
    fn default() -> Self {
        Self { epsilon: 0.05 }
    }
}

fn check_len(what: &'static str, actual: usize, expected: usize) -> Result<(), ControllerError> {
    if actual == expected {
        Ok(())
    } else {
        Err(ControllerError::Dimension {
            what,
            expected,
            actual,
        })
    }
}

/// Escort-weighted mean payoff `Σφf / Σφ`.
pub fn weighted_average_payoff(
    x: &PopulationState,
    f: &PayoffVector,
) -> Result<f64, ControllerError> {
    check_len("payoffs", f.len(), x.len())?;
    let phi = x.escort();
    let mass: f64 = phi.iter().sum();
    if mass <= 0.0 {
        return Err(GeometryError::Degenerate.into());
    }
    let weighted: f64 = phi.iter().zip(f.as_slice()).map(|(p, v)| p * v).sum();
    Ok(weighted / mass)
}

/// Centralized escort dynamics `φ_i (f_i - f_φ)`.
pub fn ed_velocity(x: &PopulationState, f: &PayoffVector) -> Result<Vec<f64>, ControllerError> {
    let mean = weighted_average_payoff(x, f)?;
    Ok(x.escort()
        .iter()
        .zip(f.as_slice())
        .map(|(p, v)| p * (v - mean))
        .collect())
}

/// Distributed escort dynamics `φ_i Σ_{j∈N_i} φ_j (f_j - f_i)`.
pub fn ded_velocity(
    x: &PopulationState,
    f: &PayoffVector,
    graph: &CommGraph,
) -> Result<Vec<f64>, ControllerError> {
    check_len("payoffs", f.len(), x.len())?;
    check_len("graph nodes", graph.node_count(), x.len())?;
    let phi = x.escort();
    let f = f.as_slice();
    Ok((0..x.len())
        .map(|i| {
            let pull: f64 = graph
                .neighbors(i)
                .unwrap_or(&[])
                .iter()
                .map(|&j| phi[j] * (f[j] - f[i]))
                .sum();
            phi[i] * pull
        })
        .collect())
}

/// Link weights `φ_i φ_j` on graph edges, zero elsewhere.
pub fn link_weights(
    x: &PopulationState,
    graph: &CommGraph,
) -> Result<DMatrix<f64>, ControllerError> {
    check_len("graph nodes", graph.node_count(), x.len())?;
    let phi = x.escort();
    let n = x.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if graph.has_edge(i, j) {
            phi[i] * phi[j]
        } else {
            0.0
        }
    }))
}

/// Laplacian-form DED: `Σ_j ρ_ij (f_j - f_i)` for a symmetric weight matrix.
pub fn ded_velocity_weighted(
    f: &PayoffVector,
    weights: &DMatrix<f64>,
) -> Result<Vec<f64>, ControllerError> {
    let n = f.len();
    check_len("weight rows", weights.nrows(), n)?;
    check_len("weight columns", weights.ncols(), n)?;
    for i in 0..n {
        for j in 0..n {
            let w = weights[(i, j)];
            if !(w >= 0.0 && w.is_finite()) || (i == j && w != 0.0) {
                return Err(ControllerError::InvalidWeight(i + 1, j + 1));
            }
            if w != weights[(j, i)] {
                return Err(ControllerError::Asymmetric(i + 1, j + 1));
            }
        }
    }
    let f = f.as_slice();
    Ok((0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| weights[(i, j)] != 0.0)
                .map(|j| weights[(i, j)] * (f[j] - f[i]))
                .sum()
        })
        .collect())
}

/// Payoff plus the derivative of a log barrier:
/// `r_i = f_i - ε [1/(v_i - lower_i) - 1/(upper_i - v_i)]`.
pub fn dip_payoff(
    f: &PayoffVector,
    v: &[f64],
    geometry: &BoundedSimplex,
    params: DipParams,
) -> Result<Vec<f64>, ControllerError> {
    barrier_payoff(f, v, geometry, params.epsilon())
}

/// As [`dip_payoff`] but accepts any `ε ≥ 0`; `ε = 0` returns `f`.
pub fn barrier_payoff(
    f: &PayoffVector,
    v: &[f64],
    geometry: &BoundedSimplex,
    epsilon: f64,
) -> Result<Vec<f64>, ControllerError> {
    check_len("payoffs", f.len(), geometry.len())?;
    check_len("allocations", v.len(), geometry.len())?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(ControllerError::Epsilon(epsilon));
    }
    v.iter()
        .zip(f.as_slice())
        .zip(geometry.lower().iter().zip(geometry.upper()))
        .enumerate()
        .map(|(i, ((&vi, &fi), (&lo, &up)))| {
            if !(vi > lo && vi < up) {
                return Err(ControllerError::BarrierDomain {
                    index: i + 1,
                    value: vi,
                    lower: lo,
                    upper: up,
                });
            }
            Ok(fi - epsilon * (1.0 / (vi - lo) - 1.0 / (up - vi)))
        })
        .collect()
}

/// Consensus on modified payoffs `Σ_{j∈N_i} (r_j - r_i)`.
pub fn dip_velocity(v: &[f64], r: &[f64], graph: &CommGraph) -> Result<Vec<f64>, ControllerError> {
    check_len("modified payoffs", r.len(), v.len())?;
    check_len("graph nodes", graph.node_count(), v.len())?;
    Ok((0..r.len())
        .map(|i| {
            graph
                .neighbors(i)
                .unwrap_or(&[])
                .iter()
                .map(|&j| r[j] - r[i])
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Ded,
    Ed,
    Dip,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ded => "ded",
            Self::Ed => "ed",
            Self::Dip => "dip",
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ded" => Ok(Self::Ded),
            "ed" => Ok(Self::Ed),
            "dip" => Ok(Self::Dip),
            other => Err(format!(
                "unknown controller `{other}` (expected ded, ed or dip)"
            )),
        }
    }
}

/// Which dynamics to run and how hard to drive them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    /// Multiplies the velocity before the Euler update.
    pub gain: f64,
    /// Controller updates per plant step.
    pub substeps: usize,
    pub dip: DipParams,
}

impl ControllerSpec {
    pub fn new(kind: ControllerKind, gain: f64) -> Result<Self, ControllerError> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(ControllerError::Gain(gain));
        }
        Ok(Self {
            kind,
            gain,
            substeps: 1,
            dip: DipParams::default(),
        })
    }

    pub fn with_substeps(mut self, substeps: usize) -> Result<Self, ControllerError> {
        if substeps == 0 {
            return Err(ControllerError::Substeps);
        }
        self.substeps = substeps;
        Ok(self)
    }

    pub fn with_dip(mut self, dip: DipParams) -> Self {
        self.dip = dip;
        self
    }

    /// Unscaled velocity of the selected dynamics.
    ///
    /// Payoffs are tracking errors, so the centralized dynamics run on the
    /// fitness `-f`; this makes them agree in direction with DED.
    pub fn velocity(
        &self,
        x: &PopulationState,
        f: &PayoffVector,
        graph: &CommGraph,
    ) -> Result<Vec<f64>, ControllerError> {
        match self.kind {
            ControllerKind::Ded => ded_velocity(x, f, graph),
            ControllerKind::Ed => Ok(ed_velocity(x, f)?.into_iter().map(|v| -v).collect()),
            ControllerKind::Dip => {
                let r = dip_payoff(f, x.values(), x.geometry(), self.dip)?;
                dip_velocity(x.values(), &r, graph)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Topology;

    fn payoffs(v: &[f64]) -> PayoffVector {
        PayoffVector::new(v.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn unit(n: usize) -> BoundedSimplex {
        BoundedSimplex::uniform(n, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn weighted_average_examples() {
        let g = unit(3);
        let s = PopulationState::new(&g, vec![0.5, 0.3, 0.2]).unwrap();
        assert!((weighted_average_payoff(&s, &payoffs(&[2.0; 3])).unwrap() - 2.0).abs() < 1e-15);
        let sym = PopulationState::new(&g, vec![1.0 / 3.0; 3]).unwrap();
        assert!(
            weighted_average_payoff(&sym, &payoffs(&[1.0, 0.0, -1.0]))
                .unwrap()
                .abs()
                < 1e-16
        );
        let mean = weighted_average_payoff(&s, &payoffs(&[1.0, 0.0, -1.0])).unwrap();
        assert!((mean - (0.125 - 0.08) / 0.31).abs() < 1e-15);
    }

    #[test]
    fn ed_examples() {
        let g = unit(3);
        let s = PopulationState::new(&g, vec![0.5, 0.3, 0.2]).unwrap();
        assert!(ed_velocity(&s, &payoffs(&[3.0; 3]))
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-16));
        let f = [1.0, 0.0, -1.0];
        let mean = 0.045 / 0.31;
        let expected: Vec<f64> = [0.125, 0.105, 0.08]
            .iter()
            .zip(f)
            .map(|(p, v)| p * (v - mean))
            .collect();
        let v = ed_velocity(&s, &payoffs(&f)).unwrap();
        assert!(close(&v, &expected, 1e-15));
        assert!(close(
            &v,
            &[
                0.10685483870967742,
                -0.015241935483870967,
                -0.09161290322580645
            ],
            1e-15
        ));
        assert!(v.iter().sum::<f64>().abs() < 1e-16);
        let pinned = PopulationState::new(&g, vec![0.0, 0.7, 0.3]).unwrap();
        assert_eq!(ed_velocity(&pinned, &payoffs(&f)).unwrap()[0], 0.0);
    }

    #[test]
    fn ded_two_node_example() {
        let g = unit(2);
        let path = CommGraph::build(&Topology::Path, 2).unwrap();
        let s = PopulationState::new(&g, vec![0.6, 0.4]).unwrap();
        assert!(close(&s.escort(), &[0.24, 0.24], 1e-15));
        let v = ded_velocity(&s, &payoffs(&[2.0, 0.0]), &path).unwrap();
        assert!(close(&v, &[-0.1152, 0.1152], 1e-15));
        let w = link_weights(&s, &path).unwrap();
        assert!((w[(0, 1)] - 0.0576).abs() < 1e-15);
        assert_eq!(w[(0, 0)], 0.0);
    }

    #[test]
    fn ded_three_node_path_example() {
        let g = unit(3);
        let path = CommGraph::build(&Topology::Path, 3).unwrap();
        let s = PopulationState::new(&g, vec![0.5, 0.3, 0.2]).unwrap();
        let f = payoffs(&[1.0, 0.0, -1.0]);
        let expected = [-0.013125, 0.004725, 0.0084];
        let v = ded_velocity(&s, &f, &path).unwrap();
        assert!(close(&v, &expected, 1e-15));
        let w = link_weights(&s, &path).unwrap();
        assert_eq!(w[(0, 2)], 0.0);
        assert!(close(
            &ded_velocity_weighted(&f, &w).unwrap(),
            &expected,
            1e-15
        ));
        assert!(ded_velocity(&s, &payoffs(&[0.4; 3]), &path)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn weighted_form_validation() {
        let f = payoffs(&[1.0, 2.0]);
        assert_eq!(
            ded_velocity_weighted(&f, &DMatrix::zeros(2, 2)).unwrap(),
            vec![0.0, 0.0]
        );
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.2, 0.0]);
        assert!(matches!(
            ded_velocity_weighted(&f, &asym),
            Err(ControllerError::Asymmetric(1, 2))
        ));
        let diag = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.0]);
        assert!(matches!(
            ded_velocity_weighted(&f, &diag),
            Err(ControllerError::InvalidWeight(1, 1))
        ));
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.3, 0.0]);
        assert_eq!(
            ded_velocity_weighted(&payoffs(&[5.0, 5.0]), &w).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn dip_payoff_examples() {
        let g = BoundedSimplex::uniform(2, 0.0, 2.0, 1.0).unwrap();
        let f = payoffs(&[0.3, -0.2]);
        let r = dip_payoff(&f, &[1.0, 0.5], &g, DipParams::new(0.1).unwrap()).unwrap();
        assert_eq!(r[0], 0.3);
        let b = -0.1 * (1.0 / 0.5 - 1.0 / 1.5);
        assert!((r[1] - (-0.2 + b)).abs() < 1e-16);
        assert!((b + 0.13333333333333333).abs() < 1e-16);
        assert_eq!(
            barrier_payoff(&f, &[1.0, 0.5], &g, 0.0).unwrap(),
            vec![0.3, -0.2]
        );
        assert!(matches!(
            dip_payoff(&f, &[0.0, 1.0], &g, DipParams::default()),
            Err(ControllerError::BarrierDomain { index: 1, .. })
        ));
        assert!(DipParams::new(0.0).is_err());
    }

    #[test]
    fn dip_velocity_examples() {
        let p2 = CommGraph::build(&Topology::Path, 2).unwrap();
        assert_eq!(
            dip_velocity(&[0.0, 0.0], &[2.0, 0.0], &p2).unwrap(),
            vec![-2.0, 2.0]
        );
        let p3 = CommGraph::build(&Topology::Path, 3).unwrap();
        assert_eq!(
            dip_velocity(&[0.0; 3], &[1.0, 0.0, -1.0], &p3).unwrap(),
            vec![-1.0, 0.0, 1.0]
        );
        assert_eq!(
            dip_velocity(&[0.0; 3], &[4.0; 3], &p3).unwrap(),
            vec![0.0; 3]
        );
        assert!(dip_velocity(&[0.0; 2], &[1.0, 0.0], &p3).is_err());
    }

    #[test]
    fn spec_dispatch() {
        let g = unit(3);
        let path = CommGraph::build(&Topology::Path, 3).unwrap();
        let s = PopulationState::new(&g, vec![0.5, 0.3, 0.2]).unwrap();
        let f = payoffs(&[1.0, 0.0, -1.0]);
        let ded = ControllerSpec::new(ControllerKind::Ded, 1.0).unwrap();
        assert_eq!(
            ded.velocity(&s, &f, &path).unwrap(),
            ded_velocity(&s, &f, &path).unwrap()
        );
        assert!(ControllerSpec::new(ControllerKind::Ded, 0.0).is_err());
        assert!(ded.with_substeps(0).is_err());
        assert_eq!(
            "dip".parse::<ControllerKind>().unwrap(),
            ControllerKind::Dip
        );
        assert!("pid".parse::<ControllerKind>().is_err());
        assert!(PayoffVector::new(vec![f64::NAN]).is_err());
    }
}
