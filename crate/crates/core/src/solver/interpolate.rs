//! Evaluation of grid fields at arbitrary points of the cap.

use nalgebra::DVector;

use super::grid::GridField;
use crate::cap::CapDomain;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::SpherePoint;

/// Bilinear interpolation in `(r, θ)`, periodic in `θ`. Gradients are
/// nodal centred differences, interpolated the same way and projected onto
/// the tangent plane.
#[derive(Debug, Clone)]
pub struct GridInterpolant {
    field: GridField,
    cap: CapDomain,
    gradients: Vec<[f64; 3]>,
}

/// Fractional cell coordinates this close to an integer snap to the node.
const SNAP: f64 = 1e-12;

impl GridInterpolant {
    pub fn new(field: GridField, cap: CapDomain) -> Result<Self> {
        let grid = *field.grid();
        if (grid.radius() - cap.radius()).abs() > 1e-14 * cap.radius() {
            return Err(Error::Precondition(format!(
                "grid radius {} differs from cap radius {}",
                grid.radius(),
                cap.radius()
            )));
        }
        let gradients = (0..grid.num_nodes())
            .map(|k| nodal_gradient(&field, &cap, k))
            .collect();
        Ok(Self {
            field,
            cap,
            gradients,
        })
    }

    pub fn field(&self) -> &GridField {
        &self.field
    }

    pub fn cap(&self) -> &CapDomain {
        &self.cap
    }

    /// Cell corners `(node, weight)` containing `x`.
    fn corners(&self, x: &SpherePoint) -> Result<[(usize, f64); 4]> {
        let grid = self.field.grid();
        let (r, theta) = self.cap.polar(x)?;
        if !self.cap.contains(x) {
            return Err(Error::OutsideCap {
                distance: r,
                radius: self.cap.radius(),
            });
        }
        let snap = |v: f64| {
            if (v - v.round()).abs() < SNAP {
                v.round()
            } else {
                v
            }
        };
        let rr = snap(r.min(grid.radius()) / grid.hr());
        let i = (rr.floor() as usize).min(grid.nr() - 1);
        let w = rr - i as f64;
        let tt = snap(theta / grid.htheta());
        let j = (tt.floor() as usize) % grid.ntheta();
        let s = tt - tt.floor();
        Ok([
            (grid.index(i, j), (1.0 - w) * (1.0 - s)),
            (grid.index(i, j + 1), (1.0 - w) * s),
            (grid.index(i + 1, j), w * (1.0 - s)),
            (grid.index(i + 1, j + 1), w * s),
        ])
    }
}

fn nodal_gradient(field: &GridField, cap: &CapDomain, k: usize) -> [f64; 3] {
    let grid = field.grid();
    let h = grid.hr();
    let nt = grid.ntheta();
    let nr = grid.nr();
    let (i, j) = grid.ring_angle(k);
    let v = if i == 0 {
        let (e1, e2) = cap.pole_basis();
        let w = 2.0 / (nt as f64 * h);
        let (mut a, mut b) = (0.0, 0.0);
        for jj in 0..nt {
            let t = grid.theta(jj);
            a += w * t.cos() * field.get(1, jj);
            b += w * t.sin() * field.get(1, jj);
        }
        e1 * a + e2 * b
    } else {
        let (r, theta) = (grid.r(i), grid.theta(j));
        let ur = if i == nr {
            (3.0 * field.get(nr, j) - 4.0 * field.get(nr - 1, j) + field.get(nr - 2, j)) / (2.0 * h)
        } else {
            (field.get(i + 1, j) - field.get(i - 1, j)) / (2.0 * h)
        };
        let ut = (field.get(i, j + 1) - field.get(i, j + nt - 1)) / (2.0 * grid.htheta() * r.sin());
        cap.radial_unit(r, theta) * ur + cap.angular_unit(theta) * ut
    };
    [v[0], v[1], v[2]]
}

impl ScalarField for GridInterpolant {
    fn value(&self, x: &SpherePoint) -> Result<f64> {
        let u = self.field.values();
        Ok(self.corners(x)?.iter().map(|&(k, w)| w * u[k]).sum())
    }

    fn value_and_gradient(&self, x: &SpherePoint) -> Result<(f64, DVector<f64>)> {
        let u = self.field.values();
        let corners = self.corners(x)?;
        let mut value = 0.0;
        let mut g = DVector::zeros(3);
        for &(k, w) in &corners {
            value += w * u[k];
            g += DVector::from_column_slice(&self.gradients[k]) * w;
        }
        let normal = g.dot(x.coords());
        Ok((value, g - x.coords() * normal))
    }

    fn nodes(&self) -> Vec<SpherePoint> {
        let grid = self.field.grid();
        (0..grid.num_nodes())
            .map(|k| {
                let (r, theta) = grid.polar(k);
                self.cap.point_at(r, theta)
            })
            .collect()
    }
}
