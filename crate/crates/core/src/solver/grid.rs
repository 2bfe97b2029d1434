use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Smallest admissible number of cells in either direction.
pub const MIN_CELLS: usize = 8;

/// Uniform polar grid on a cap of radius `R`: a single pole node plus rings
/// `i = 1..=nr` at `r_i = i R / nr`, each with `ntheta` periodic nodes.
///
/// Nodes are numbered pole first, then ring by ring, so the unknowns of a
/// Dirichlet problem are a prefix of the node list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    nr: usize,
    ntheta: usize,
    radius: f64,
}

impl PolarGrid {
    pub fn new(nr: usize, ntheta: usize, radius: f64) -> Result<Self> {
        if nr < MIN_CELLS || ntheta < MIN_CELLS {
            return Err(Error::GridTooCoarse {
                min: MIN_CELLS,
                nr,
                ntheta,
            });
        }
        if !(radius > 0.0 && radius < FRAC_PI_2) {
            return Err(Error::Domain {
                value: radius,
                domain: "cap radius (0, pi/2)",
            });
        }
        Ok(Self { nr, ntheta, radius })
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn ntheta(&self) -> usize {
        self.ntheta
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn hr(&self) -> f64 {
        self.radius / self.nr as f64
    }

    pub fn htheta(&self) -> f64 {
        2.0 * PI / self.ntheta as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        if i == self.nr {
            self.radius
        } else {
            i as f64 * self.hr()
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.htheta()
    }

    pub fn num_nodes(&self) -> usize {
        1 + self.nr * self.ntheta
    }

    /// Pole plus every ring strictly inside the boundary.
    pub fn num_interior(&self) -> usize {
        1 + (self.nr - 1) * self.ntheta
    }

    /// Node index of ring `i`, angle `j` (taken modulo `ntheta`).
    pub fn index(&self, i: usize, j: usize) -> usize {
        if i == 0 {
            0
        } else {
            1 + (i - 1) * self.ntheta + j % self.ntheta
        }
    }

    /// `(i, j)` of a node; the pole reports `j = 0`.
    pub fn ring_angle(&self, k: usize) -> (usize, usize) {
        if k == 0 {
            (0, 0)
        } else {
            (1 + (k - 1) / self.ntheta, (k - 1) % self.ntheta)
        }
    }

    /// `(r, θ)` of a node.
    pub fn polar(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ring_angle(k);
        (self.r(i), self.theta(j))
    }
}

/// Nodal values on a [`PolarGrid`], including the boundary ring.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: PolarGrid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: PolarGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_nodes(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid field values"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: PolarGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.num_nodes()],
        }
    }

    /// Samples `f(r, θ)` at every node (the pole at `θ = 0`).
    pub fn from_fn(grid: PolarGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.num_nodes())
            .map(|k| {
                let (r, theta) = grid.polar(k);
                f(r, theta)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn boundary_values(&self) -> &[f64] {
        &self.values[self.grid.num_interior()..]
    }

    pub fn max_abs_diff(&self, other: &GridField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Precondition("fields live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let g = PolarGrid::new(8, 12, 1.0).unwrap();
        assert_eq!(g.num_nodes(), 97);
        for k in 0..g.num_nodes() {
            let (i, j) = g.ring_angle(k);
            assert_eq!(g.index(i, j), k);
        }
        assert_eq!(g.index(3, 12), g.index(3, 0));
        assert_eq!(g.r(8), 1.0);
        let f = GridField::from_fn(g, |r, _| r).unwrap();
        assert_eq!(f.boundary_values().len(), 12);
        assert!(f.boundary_values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn coarse_grids_rejected() {
        assert!(matches!(
            PolarGrid::new(7, 16, 1.0),
            Err(Error::GridTooCoarse { .. })
        ));
        assert!(PolarGrid::new(8, 7, 1.0).is_err());
        assert!(PolarGrid::new(8, 8, 1.6).is_err());
    }
}
