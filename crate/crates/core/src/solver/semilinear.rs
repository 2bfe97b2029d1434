//! `φ(|∇u|) - Δu = c(d) - λu - μ|∇u|` on a cap with zero Dirichlet data.

use super::banded::BandedMatrix;
use super::grid::{GridField, PolarGrid};
use super::laplacian::stencil;
use super::{damped_newton, NewtonProblem, SolveSettings, SolveStats};
use crate::error::{Error, Result};
use crate::operators::{Cone, IsotropicOperator, Phi, Psi, RhsSpec};

/// Linear forms giving the two orthonormal components of the discrete
/// gradient at a non-boundary node.
fn gradient_forms(grid: &PolarGrid, k: usize) -> GradientForms {
    let h = grid.hr();
    let nt = grid.ntheta();
    let (i, j) = grid.ring_angle(k);
    if i == 0 {
        // first Fourier mode of the first ring
        let w = 2.0 / (nt as f64 * h);
        let cos = (0..nt)
            .map(|jj| (grid.index(1, jj), w * grid.theta(jj).cos()))
            .collect();
        let sin = (0..nt)
            .map(|jj| (grid.index(1, jj), w * grid.theta(jj).sin()))
            .collect();
        return [cos, sin];
    }
    let a = 1.0 / (2.0 * grid.htheta() * grid.r(i).sin());
    let b = 1.0 / (2.0 * h);
    [
        vec![(grid.index(i + 1, j), b), (grid.index(i - 1, j), -b)],
        vec![(grid.index(i, j + 1), a), (grid.index(i, j + nt - 1), -a)],
    ]
}

/// Sparse rows for the two gradient components at one node.
type GradientForms = [Vec<(usize, f64)>; 2];

struct Semilinear {
    grid: PolarGrid,
    stencils: Vec<Vec<(usize, f64)>>,
    gradients: Option<Vec<GradientForms>>,
    forcing: Vec<f64>,
    lambda: f64,
    /// Coefficient of `|∇u|` in `F`: the slope of `φ` plus `μ`.
    slope: f64,
    diagonal: Vec<f64>,
}

impl Semilinear {
    fn new(op: &IsotropicOperator, rhs: &RhsSpec, grid: PolarGrid) -> Result<Self> {
        if op.psi != Psi::Identity || op.cone != Cone::All {
            return Err(Error::Precondition(
                "the two-dimensional solver needs psi = identity on all of R^n".into(),
            ));
        }
        rhs.validate()?;
        if !(rhs.lambda > 0.0) {
            return Err(Error::Precondition(format!(
                "the two-dimensional solver needs lambda > 0, got {}",
                rhs.lambda
            )));
        }
        let phi_slope = match op.phi {
            Phi::Zero => 0.0,
            Phi::Linear { slope } => slope,
        };
        let n = grid.num_interior();
        let stencils: Vec<_> = (0..n).map(|k| stencil(&grid, k)).collect();
        let slope = phi_slope + rhs.mu;
        let gradients = (slope != 0.0).then(|| (0..n).map(|k| gradient_forms(&grid, k)).collect());
        let forcing = (0..n)
            .map(|k| rhs.c.eval(grid.polar(k).0))
            .collect::<Result<_>>()?;
        let diagonal = stencils
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let own: f64 = row.iter().filter(|(m, _)| *m == k).map(|(_, c)| c).sum();
                rhs.lambda - own
            })
            .collect();
        Ok(Self {
            grid,
            stencils,
            gradients,
            forcing,
            lambda: rhs.lambda,
            slope,
            diagonal,
        })
    }

    fn full(&self, u: &[f64]) -> Vec<f64> {
        let mut full = u.to_vec();
        full.resize(self.grid.num_nodes(), 0.0);
        full
    }
}

fn apply(form: &[(usize, f64)], u: &[f64]) -> f64 {
    form.iter().map(|&(m, c)| c * u[m]).sum()
}

impl NewtonProblem for Semilinear {
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let full = self.full(u);
        Ok((0..u.len())
            .map(|k| {
                let mut f = -apply(&self.stencils[k], &full) + self.lambda * u[k] - self.forcing[k];
                if let Some(g) = &self.gradients {
                    f += self.slope * apply(&g[k][0], &full).hypot(apply(&g[k][1], &full));
                }
                f
            })
            .collect())
    }

    fn scale(&self, _u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.diagonal.clone())
    }

    fn newton_step(&self, u: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let n = u.len();
        let nt = self.grid.ntheta();
        let full = self.full(u);
        let mut jac = BandedMatrix::zeros(n, nt, nt);
        for k in 0..n {
            for &(m, c) in &self.stencils[k] {
                if m < n {
                    jac.add(k, m, -c);
                }
            }
            jac.add(k, k, self.lambda);
            if let Some(g) = &self.gradients {
                let gx = apply(&g[k][0], &full);
                let gy = apply(&g[k][1], &full);
                let p = gx.hypot(gy);
                if p > 0.0 {
                    for (form, comp) in [(&g[k][0], gx), (&g[k][1], gy)] {
                        for &(m, c) in form {
                            if m < n {
                                jac.add(k, m, self.slope * comp * c / p);
                            }
                        }
                    }
                }
            }
        }
        let mut delta = f.to_vec();
        jac.solve_in_place(&mut delta)?;
        Ok(delta)
    }
}

/// Damped Newton with an analytic banded Jacobian, starting from `u = 0`.
/// Requires `ψ = identity` and `λ > 0`, which makes the Jacobian diagonally
/// dominant.
pub fn solve_semilinear(
    op: &IsotropicOperator,
    rhs: &RhsSpec,
    grid: PolarGrid,
    settings: &SolveSettings,
) -> Result<(GridField, SolveStats)> {
    let problem = Semilinear::new(op, rhs, grid)?;
    let (u, stats) = damped_newton(&problem, vec![0.0; grid.num_interior()], settings)?;
    let field = GridField::new(grid, problem.full(&u))?;
    Ok((field, stats))
}
