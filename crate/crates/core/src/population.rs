//! Bounded simplex geometry and escort functions.
//!
//! A population state `x` carries `n` strategy masses summing to `total`,
//! each inside its own `[lower, upper]` box. The feasible set is the
//! intersection of a lower simplex (vertices `lower + σ_lo e_j`) and an upper
//! simplex (vertices `upper + σ_up e_j`), and the escort weight of a strategy is
//! the product of its barycentric coordinates in both.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("a bounded simplex needs at least 2 strategies, got {0}")]
    TooFewStrategies(usize),
    #[error("lower bounds have {lower} entries but upper bounds have {upper}")]
    Dimension { lower: usize, upper: usize },
    #[error("strategy {index}: lower bound {lower} must be below upper bound {upper}")]
    EmptyBox {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("strategy {0}: lower bound must be nonnegative")]
    NegativeLower(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("sum of lower bounds {sum} must be below the total {total} (sigma_lo > 0)")]
    LowerSum { sum: f64, total: f64 },
    #[error("sum of upper bounds {sum} must exceed the total {total} (sigma_up < 0)")]
    UpperSum { sum: f64, total: f64 },
    #[error("state has {actual} entries, geometry has {expected}")]
    StateLength { expected: usize, actual: usize },
    #[error("strategy {index}: value {value} is outside [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("state sums to {sum}, expected {total}")]
    Mass { sum: f64, total: f64 },
    #[error("every strategy sits on a bound, escort weights vanish")]
    Degenerate,
    #[error("vertex matrix is singular")]
    Singular,
}

/// Box-constrained simplex `{x : Σx = total, lower ≤ x ≤ upper}` with a nonempty interior.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedSimplex {
    lower: Vec<f64>,
    upper: Vec<f64>,
    total: f64,
    sigma_lo: f64,
    sigma_up: f64,
}

impl BoundedSimplex {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, total: f64) -> Result<Self, GeometryError> {
        if lower.len() != upper.len() {
            return Err(GeometryError::Dimension {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        if lower.len() < 2 {
            return Err(GeometryError::TooFewStrategies(lower.len()));
        }
        if !total.is_finite() {
            return Err(GeometryError::NonFinite("total"));
        }
        for (i, (&lo, &up)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !up.is_finite() {
                return Err(GeometryError::NonFinite("bounds"));
            }
            if lo < 0.0 {
                return Err(GeometryError::NegativeLower(i + 1));
            }
            if lo >= up {
                return Err(GeometryError::EmptyBox {
                    index: i + 1,
                    lower: lo,
                    upper: up,
                });
            }
        }
        let lo_sum: f64 = lower.iter().sum();
        let up_sum: f64 = upper.iter().sum();
        let sigma_lo = total - lo_sum;
        let sigma_up = total - up_sum;
        if sigma_lo <= 0.0 {
            return Err(GeometryError::LowerSum { sum: lo_sum, total });
        }
        if sigma_up >= 0.0 {
            return Err(GeometryError::UpperSum { sum: up_sum, total });
        }
        Ok(Self {
            lower,
            upper,
            total,
            sigma_lo,
            sigma_up,
        })
    }

    /// Same box `[lower, upper]` for every strategy.
    pub fn uniform(n: usize, lower: f64, upper: f64, total: f64) -> Result<Self, GeometryError> {
        Self::new(vec![lower; n], vec![upper; n], total)
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// `(σ_lo, σ_up)`: distance of the total from the lower and upper bound sums.
    pub fn escort_params(&self) -> (f64, f64) {
        (self.sigma_lo, self.sigma_up)
    }

    /// Vertex matrices of the lower and upper simplices, one vertex per column.
    pub fn vertex_matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.len();
        let lo = DMatrix::from_fn(n, n, |i, j| {
            self.lower[i] + if i == j { self.sigma_lo } else { 0.0 }
        });
        let up = DMatrix::from_fn(n, n, |i, j| {
            self.upper[i] + if i == j { self.sigma_up } else { 0.0 }
        });
        (lo, up)
    }

    /// Tolerance used for clamping and for the mass check.
    pub fn tolerance(&self) -> f64 {
        1e-9 * self.total.abs()
    }

    /// Number of box breaches beyond tolerance, plus one if the mass is off.
    pub fn violations(&self, x: &[f64]) -> usize {
        let tol = self.tolerance();
        let boxes = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .filter(|(&v, (&lo, &up))| !(v >= lo - tol && v <= up + tol))
            .count();
        let sum: f64 = x.iter().sum();
        let mass_ok = (sum - self.total).abs() <= tol;
        boxes + usize::from(!mass_ok)
    }

    /// `η_i = (x_i - lower_i)/σ_lo` for arbitrary vectors.
    pub fn eta_of(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lower)
            .map(|(v, lo)| (v - lo) / self.sigma_lo)
            .collect()
    }

    /// `ξ_i = (x_i - upper_i)/σ_up` for arbitrary vectors.
    pub fn xi_of(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.upper)
            .map(|(v, up)| (v - up) / self.sigma_up)
            .collect()
    }

    /// `φ_i = η_i ξ_i` for arbitrary vectors. Negative outside the box.
    pub fn escort_of(&self, x: &[f64]) -> Vec<f64> {
        self.eta_of(x)
            .iter()
            .zip(self.xi_of(x))
            .map(|(a, b)| a * b)
            .collect()
    }
}

/// A validated allocation on a [`BoundedSimplex`].
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState<'g> {
    geometry: &'g BoundedSimplex,
    x: Vec<f64>,
    clamped: usize,
}

impl<'g> PopulationState<'g> {
    /// Validates `x`. Components within `1e-9·total` outside their box are
    /// clamped onto the bound; larger breaches and mass drift are errors.
    pub fn new(geometry: &'g BoundedSimplex, mut x: Vec<f64>) -> Result<Self, GeometryError> {
        if x.len() != geometry.len() {
            return Err(GeometryError::StateLength {
                expected: geometry.len(),
                actual: x.len(),
            });
        }
        let tol = geometry.tolerance();
        let mut clamped = 0;
        for (i, v) in x.iter_mut().enumerate() {
            let (lo, up) = (geometry.lower[i], geometry.upper[i]);
            if !v.is_finite() {
                return Err(GeometryError::NonFinite("state"));
            }
            if *v < lo - tol || *v > up + tol {
                return Err(GeometryError::OutOfBounds {
                    index: i + 1,
                    value: *v,
                    lower: lo,
                    upper: up,
                });
            }
            if *v < lo {
                *v = lo;
                clamped += 1;
            } else if *v > up {
                *v = up;
                clamped += 1;
            }
        }
        let sum: f64 = x.iter().sum();
        if (sum - geometry.total).abs() > tol {
            return Err(GeometryError::Mass {
                sum,
                total: geometry.total,
            });
        }
        Ok(Self {
            geometry,
            x,
            clamped,
        })
    }

    /// Uniform split `total/n`, which is interior whenever it fits every box.
    pub fn uniform(geometry: &'g BoundedSimplex) -> Result<Self, GeometryError> {
        let share = geometry.total / geometry.len() as f64;
        Self::new(geometry, vec![share; geometry.len()])
    }

    pub fn geometry(&self) -> &'g BoundedSimplex {
        self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn into_values(self) -> Vec<f64> {
        self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Components moved onto a bound during validation.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// True if every component is strictly inside its box.
    pub fn is_interior(&self) -> bool {
        self.x
            .iter()
            .zip(self.geometry.lower.iter().zip(&self.geometry.upper))
            .all(|(&v, (&lo, &up))| v > lo && v < up)
    }

    pub fn eta(&self) -> Vec<f64> {
        self.geometry.eta_of(&self.x)
    }

    pub fn xi(&self) -> Vec<f64> {
        self.geometry.xi_of(&self.x)
    }

    pub fn escort(&self) -> Vec<f64> {
        self.geometry.escort_of(&self.x)
    }

    /// Escort weights normalized to sum to one.
    pub fn escort_distribution(&self) -> Result<Vec<f64>, GeometryError> {
        let phi = self.escort();
        let mass: f64 = phi.iter().sum();
        if mass <= 0.0 {
            return Err(GeometryError::Degenerate);
        }
        Ok(phi.iter().map(|p| p / mass).collect())
    }

    /// Barycentric coordinates in the lower and upper simplices, obtained by
    /// solving against the vertex matrices.
    pub fn simplex_coordinates(&self) -> Result<(Vec<f64>, Vec<f64>), GeometryError> {
        let (s_lo, s_up) = self.geometry.vertex_matrices();
        let rhs = DVector::from_column_slice(&self.x);
        let eta = s_lo.lu().solve(&rhs).ok_or(GeometryError::Singular)?;
        let xi = s_up.lu().solve(&rhs).ok_or(GeometryError::Singular)?;
        Ok((eta.iter().copied().collect(), xi.iter().copied().collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn escort_params_examples() {
        let g = BoundedSimplex::uniform(3, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(g.escort_params(), (1.0, -2.0));
        let mut upper = vec![3.25; 50];
        upper.push(130.0);
        let rooms = BoundedSimplex::new(vec![0.0; 50], vec![3.25; 50], 130.0).unwrap();
        assert_eq!(rooms.escort_params(), (130.0, -32.5));
        let with_slack = BoundedSimplex::new(vec![0.0; 51], upper, 130.0).unwrap();
        assert_eq!(with_slack.escort_params(), (130.0, -162.5));
        assert!(matches!(
            BoundedSimplex::new(vec![0.6, 0.5], vec![1.0, 1.0], 1.0),
            Err(GeometryError::LowerSum { .. })
        ));
        assert!(matches!(
            BoundedSimplex::new(vec![0.0, 0.0], vec![0.4, 0.5], 1.0),
            Err(GeometryError::UpperSum { .. })
        ));
    }

    #[test]
    fn single_strategy_rejected() {
        assert_eq!(
            BoundedSimplex::new(vec![0.0], vec![2.0], 1.0),
            Err(GeometryError::TooFewStrategies(1))
        );
    }

    #[test]
    fn eta_xi_hand_values() {
        let g = BoundedSimplex::new(vec![0.1, 0.1], vec![0.9, 0.9], 1.0).unwrap();
        let s = PopulationState::new(&g, vec![0.6, 0.4]).unwrap();
        assert!(close(&s.eta(), &[0.625, 0.375], 1e-15));
        assert!(close(&s.xi(), &[0.375, 0.625], 1e-15));

        let unit = BoundedSimplex::uniform(3, 0.0, 1.0, 1.0).unwrap();
        let x = vec![0.5, 0.3, 0.2];
        let s = PopulationState::new(&unit, x.clone()).unwrap();
        assert_eq!(s.eta(), x);
        let third = PopulationState::new(&unit, vec![1.0 / 3.0; 3]).unwrap();
        assert!(close(&third.xi(), &[1.0 / 3.0; 3], 1e-15));
        assert!(close(&third.escort(), &[1.0 / 9.0; 3], 1e-15));
        // η = x, ξ = (1 - x)/2
        let phi: Vec<f64> = x.iter().map(|v| v * (1.0 - v) / 2.0).collect();
        assert!(close(&s.escort(), &phi, 1e-16));
        assert!(close(&s.escort(), &[0.125, 0.105, 0.08], 1e-16));
    }

    #[test]
    fn boundary_annihilates_escort() {
        let g = BoundedSimplex::uniform(3, 0.0, 1.0, 1.0).unwrap();
        let s = PopulationState::new(&g, vec![0.0, 0.4, 0.6]).unwrap();
        assert_eq!(s.eta()[0], 0.0);
        assert_eq!(s.escort()[0], 0.0);
        let s = PopulationState::new(&g, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.xi()[0], 0.0);
        assert_eq!(s.escort_distribution(), Err(GeometryError::Degenerate));
    }

    #[test]
    fn escort_distribution_normalizes() {
        let g = BoundedSimplex::uniform(3, 0.0, 1.0, 1.0).unwrap();
        let s = PopulationState::new(&g, vec![0.5, 0.3, 0.2]).unwrap();
        let d = s.escort_distribution().unwrap();
        assert!(close(&d, &[0.125 / 0.31, 0.105 / 0.31, 0.08 / 0.31], 1e-15));
        assert!(close(
            &d,
            &[0.403225806451613, 0.338709677419355, 0.258064516129032],
            1e-14
        ));
        let sym = PopulationState::new(&g, vec![1.0 / 3.0; 3]).unwrap();
        assert!(close(
            &sym.escort_distribution().unwrap(),
            &[1.0 / 3.0; 3],
            1e-15
        ));
    }

    #[test]
    fn vertex_matrix_examples() {
        let g = BoundedSimplex::new(vec![0.0, 0.0], vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(g.vertex_matrices().0, DMatrix::identity(2, 2));
        let g = BoundedSimplex::new(vec![0.1, 0.1], vec![0.9, 0.9], 1.0).unwrap();
        let (lo, up) = g.vertex_matrices();
        assert!(
            (lo - DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]))
                .abs()
                .max()
                < 1e-15
        );
        assert!(
            (up - DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 0.9, 0.1]))
                .abs()
                .max()
                < 1e-15
        );
    }

    #[test]
    fn simplex_coordinates_match_closed_form() {
        let g = BoundedSimplex::new(vec![0.1, 0.1], vec![0.9, 0.9], 1.0).unwrap();
        let s = PopulationState::new(&g, vec![0.6, 0.4]).unwrap();
        let (eta, xi) = s.simplex_coordinates().unwrap();
        assert!(close(&eta, &[0.625, 0.375], 1e-12));
        assert!(close(&xi, &s.xi(), 1e-12));
    }

    #[test]
    fn vertex_maps_to_unit_vector() {
        let g = BoundedSimplex::new(vec![0.1, 0.2, 0.0], vec![0.9, 0.95, 0.7], 1.0).unwrap();
        let (lo, _) = g.vertex_matrices();
        let col: Vec<f64> = lo.column(1).iter().copied().collect();
        let s = PopulationState::new(&g, col).unwrap();
        let (eta, _) = s.simplex_coordinates().unwrap();
        assert!(close(&eta, &[0.0, 1.0, 0.0], 1e-12));
    }

    #[test]
    fn clamps_small_drift_and_rejects_large() {
        let g = BoundedSimplex::uniform(2, 0.0, 1.0, 1.0).unwrap();
        let s = PopulationState::new(&g, vec![-1e-12, 1.0 + 1e-12]).unwrap();
        assert_eq!(s.values(), &[0.0, 1.0]);
        assert_eq!(s.clamped(), 2);
        assert!(matches!(
            PopulationState::new(&g, vec![-1e-3, 1.001]),
            Err(GeometryError::OutOfBounds { index: 1, .. })
        ));
        assert!(matches!(
            PopulationState::new(&g, vec![0.5, 0.4]),
            Err(GeometryError::Mass { .. })
        ));
        assert!(matches!(
            PopulationState::new(&g, vec![0.5]),
            Err(GeometryError::StateLength { .. })
        ));
    }

    #[test]
    fn violation_count() {
        let g = BoundedSimplex::uniform(3, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(g.violations(&[0.2, 0.3, 0.5]), 0);
        assert_eq!(g.violations(&[-0.1, 0.6, 0.5]), 1);
        assert_eq!(g.violations(&[-0.1, 0.6, 0.6]), 2);
    }
}
