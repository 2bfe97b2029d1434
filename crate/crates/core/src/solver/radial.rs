//! Radial solutions of `φ(|u'|) + ψ(-u'') + ψ(-cot r u') = b(r, u, |u'|)`
//! with `u'(0) = 0` and `u(R) = 0`. For radial `u` the eigenvalues of
//! `-∇²u` on `S²` are `-u''` and `-cot r u'`.

use std::f64::consts::FRAC_PI_2;

use super::banded::solve_tridiagonal;
use super::grid::{GridField, PolarGrid, MIN_CELLS};
use super::{damped_newton, NewtonProblem, SolveSettings, SolveStats};
use crate::error::{Error, Result};
use crate::operators::{IsotropicOperator, RhsSpec};

/// Central-difference step of the Newton Jacobian, relative to `max(1, |u|)`.
pub const JACOBIAN_STEP: f64 = 1e-7;

/// Values `u(r_i)`, `r_i = i R / nr`, `i = 0..=nr`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    radius: f64,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(radius: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_CELLS + 1 {
            return Err(Error::GridTooCoarse {
                min: MIN_CELLS,
                nr: values.len().saturating_sub(1),
                ntheta: 0,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("radial field values"));
        }
        Ok(Self { radius, values })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nr(&self) -> usize {
        self.values.len() - 1
    }

    pub fn r(&self, i: usize) -> f64 {
        if i == self.nr() {
            self.radius
        } else {
            i as f64 * self.radius / self.nr() as f64
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The same profile on every ray of a polar grid with `ntheta` angles.
    pub fn to_grid(&self, ntheta: usize) -> Result<GridField> {
        let grid = PolarGrid::new(self.nr(), ntheta, self.radius)?;
        let values = (0..grid.num_nodes())
            .map(|k| self.values[grid.ring_angle(k).0])
            .collect();
        GridField::new(grid, values)
    }
}

struct Radial<'a> {
    op: &'a IsotropicOperator,
    rhs: &'a RhsSpec,
    h: f64,
    r: Vec<f64>,
    cot: Vec<f64>,
}

impl<'a> Radial<'a> {
    fn new(op: &'a IsotropicOperator, rhs: &'a RhsSpec, radius: f64, nr: usize) -> Result<Self> {
        if nr < MIN_CELLS {
            return Err(Error::GridTooCoarse {
                min: MIN_CELLS,
                nr,
                ntheta: 0,
            });
        }
        if !(radius > 0.0 && radius < FRAC_PI_2) {
            return Err(Error::Domain {
                value: radius,
                domain: "cap radius (0, pi/2)",
            });
        }
        op.validate()?;
        rhs.validate()?;
        let h = radius / nr as f64;
        let r: Vec<f64> = (0..nr).map(|i| i as f64 * h).collect();
        let cot = r.iter().map(|r| r.cos() / r.sin()).collect();
        Ok(Self { op, rhs, h, r, cot })
    }

    fn row(&self, i: usize, um: f64, u: f64, up: f64) -> Result<f64> {
        let h = self.h;
        if i == 0 {
            // u'(0) = 0, so u(h) - u(0) = u''(0) h² / 2 and both
            // eigenvalues equal -u''(0)
            let k = -2.0 * (up - u) / (h * h);
            return Ok(self.op.eval_spectrum(0.0, &[k, k])? - self.rhs.eval_radial(0.0, u, 0.0)?);
        }
        let d1 = (up - um) / (2.0 * h);
        let d2 = (up - 2.0 * u + um) / (h * h);
        let p = d1.abs();
        Ok(self.op.eval_spectrum(p, &[-d2, -self.cot[i] * d1])?
            - self.rhs.eval_radial(self.r[i], u, p)?)
    }

    fn at(u: &[f64], i: isize) -> f64 {
        if i < 0 {
            u[1]
        } else {
            u.get(i as usize).copied().unwrap_or(0.0)
        }
    }

    /// Tridiagonal central-difference Jacobian, three columns at a time.
    fn jacobian(&self, u: &[f64]) -> Result<[Vec<f64>; 3]> {
        let n = u.len();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for color in 0..3 {
            let mut plus = u.to_vec();
            let mut minus = u.to_vec();
            let mut steps = vec![0.0; n];
            for i in (color..n).step_by(3) {
                steps[i] = JACOBIAN_STEP * u[i].abs().max(1.0);
                plus[i] += steps[i];
                minus[i] -= steps[i];
            }
            let fp = self.residual(&plus)?;
            let fm = self.residual(&minus)?;
            for k in 0..n {
                for (col, slot) in [
                    (k.wrapping_sub(1), &mut sub),
                    (k, &mut diag),
                    (k + 1, &mut sup),
                ] {
                    if col < n && col % 3 == color {
                        slot[k] = (fp[k] - fm[k]) / (2.0 * steps[col]);
                    }
                }
            }
        }
        Ok([sub, diag, sup])
    }
}

impl NewtonProblem for Radial<'_> {
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        (0..u.len())
            .map(|i| {
                let i_s = i as isize;
                self.row(i, Self::at(u, i_s - 1), u[i], Self::at(u, i_s + 1))
            })
            .collect()
    }

    fn scale(&self, u: &[f64]) -> Result<Vec<f64>> {
        let [_, diag, _] = self.jacobian(u)?;
        Ok(diag)
    }

    fn newton_step(&self, u: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let [sub, diag, sup] = self.jacobian(u)?;
        let mut delta = f.to_vec();
        solve_tridiagonal(&sub, &diag, &sup, &mut delta)?;
        Ok(delta)
    }
}

/// Damped Newton for the radial profile on `nr` cells, starting from zero.
pub fn solve_radial(
    op: &IsotropicOperator,
    rhs: &RhsSpec,
    radius: f64,
    nr: usize,
    settings: &SolveSettings,
) -> Result<(RadialField, SolveStats)> {
    let problem = Radial::new(op, rhs, radius, nr)?;
    let (mut u, stats) = damped_newton(&problem, vec![0.0; nr], settings)?;
    u.push(0.0);
    Ok((RadialField::new(radius, u)?, stats))
}
