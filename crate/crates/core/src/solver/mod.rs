//! Finite-difference solvers on caps of `S²`: a two-dimensional semilinear
//! path for `f = -Δ` and a radial path for general isotropic `f`.

pub mod banded;
pub mod grid;
pub mod interpolate;
pub mod laplacian;
pub mod manufactured;
pub mod radial;
pub mod semilinear;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{GridField, PolarGrid};
pub use interpolate::GridInterpolant;
pub use laplacian::discrete_laplacian;
pub use manufactured::{manufactured_case, radial_exp_case, ManufacturedCase};
pub use radial::{solve_radial, RadialField};
pub use semilinear::solve_semilinear;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;
/// Newton steps are halved at most down to this fraction.
pub const MIN_DAMPING: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverMode {
    #[serde(rename = "semilinear-2d")]
    Semilinear2d,
    #[serde(rename = "radial-fully-nonlinear-1d")]
    RadialFullyNonlinear1d,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    /// Bound on the diagonally scaled residual `max_k |F_k / J_kk|`.
    pub tol: f64,
    /// Newton steps allowed; convergence must be observed within the budget.
    pub max_iter: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl SolveSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Domain {
                value: self.tol,
                domain: "residual tolerance (0, inf)",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `max_k |F_k / J_kk|`.
    pub residual: f64,
    /// Final `max_k |F_k|`.
    pub raw_residual: f64,
    /// Scaled residual before each step and after the last one.
    pub residual_history: Vec<f64>,
    /// Damping factor accepted at each step.
    pub damping_history: Vec<f64>,
}

/// A discretized nonlinear system `F(u) = 0`.
pub(crate) trait NewtonProblem {
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>>;
    /// Diagonal of the Jacobian at `u`, used to scale residuals.
    fn scale(&self, u: &[f64]) -> Result<Vec<f64>>;
    /// Solves `J(u) δ = f`.
    fn newton_step(&self, u: &[f64], f: &[f64]) -> Result<Vec<f64>>;
}

fn scaled_norm(f: &[f64], scale: &[f64]) -> f64 {
    f.iter()
        .zip(scale)
        .fold(0.0, |m, (r, s)| m.max((r / s).abs()))
}

fn sup_norm(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, r| m.max(r.abs()))
}

/// Damped Newton iteration: full steps, halved while the scaled residual
/// does not decrease, down to [`MIN_DAMPING`].
pub(crate) fn damped_newton(
    problem: &impl NewtonProblem,
    mut u: Vec<f64>,
    settings: &SolveSettings,
) -> Result<(Vec<f64>, SolveStats)> {
    settings.validate()?;
    let mut f = problem.residual(&u)?;
    let mut residual_history = Vec::new();
    let mut damping_history = Vec::new();
    for it in 0..=settings.max_iter {
        let scale = problem.scale(&u)?;
        let s = scaled_norm(&f, &scale);
        if !s.is_finite() {
            return Err(Error::NonFinite("Newton residual"));
        }
        residual_history.push(s);
        if s <= settings.tol {
            return Ok((
                u,
                SolveStats {
                    iterations: it,
                    residual: s,
                    raw_residual: sup_norm(&f),
                    residual_history,
                    damping_history,
                },
            ));
        }
        if it == settings.max_iter {
            return Err(Error::MaxIter {
                iterations: settings.max_iter,
                residual: s,
            });
        }
        let delta = problem.newton_step(&u, &f)?;
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("Newton step"));
        }
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a - alpha * d).collect();
            match problem.residual(&trial) {
                Ok(ft) if alpha <= MIN_DAMPING || scaled_norm(&ft, &scale) < s => {
                    u = trial;
                    f = ft;
                    break;
                }
                Err(e) if alpha <= MIN_DAMPING => return Err(e),
                _ => alpha *= 0.5,
            }
        }
        damping_history.push(alpha);
    }
    unreachable!("loop returns on its last iteration")
}
