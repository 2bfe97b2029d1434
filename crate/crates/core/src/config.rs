//! JSON run configuration shared by the solver, the verifier and the CLI.

use serde::{Deserialize, Serialize};

use crate::cap::{CapDomain, CapSpec};
use crate::error::{Error, Result};
use crate::operators::{IsotropicOperator, RhsSpec};
use crate::solver::{
    solve_radial, solve_semilinear, GridField, PolarGrid, RadialField, SolveSettings, SolveStats,
    SolverMode, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "Nr")]
    pub nr: usize,
    #[serde(rename = "Ntheta")]
    pub ntheta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationSettings {
    #[serde(default = "default_num_pairs")]
    pub num_pairs: usize,
    #[serde(default = "default_num_geodesics")]
    pub num_geodesics: usize,
    #[serde(default)]
    pub seed: u64,
    /// Samples per geodesic in the second-difference scan.
    #[serde(default = "default_num_t")]
    pub num_t: usize,
    #[serde(default = "default_num_boundary")]
    pub num_boundary: usize,
    /// Partner points drawn for each boundary point.
    #[serde(default = "default_num_interior")]
    pub num_interior: usize,
    #[serde(default = "default_hypothesis_trials")]
    pub hypothesis_trials: usize,
}

fn default_num_pairs() -> usize {
    100_000
}

fn default_num_geodesics() -> usize {
    1_000
}

fn default_num_t() -> usize {
    17
}

fn default_num_boundary() -> usize {
    256
}

fn default_num_interior() -> usize {
    64
}

fn default_hypothesis_trials() -> usize {
    10_000
}

impl Default for VerificationSettings {
    fn default() -> Self {
        Self {
            num_pairs: default_num_pairs(),
            num_geodesics: default_num_geodesics(),
            seed: 0,
            num_t: default_num_t(),
            num_boundary: default_num_boundary(),
            num_interior: default_num_interior(),
            hypothesis_trials: default_hypothesis_trials(),
        }
    }
}

impl VerificationSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_pairs", self.num_pairs),
            ("num_geodesics", self.num_geodesics),
            ("num_boundary", self.num_boundary),
            ("num_interior", self.num_interior),
            ("hypothesis_trials", self.hypothesis_trials),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Precondition(format!(
                "verification.{name} must be positive"
            )));
        }
        if self.num_t < 5 {
            return Err(Error::Precondition(
                "verification.num_t must be at least 5".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: SolverMode,
    pub operator: IsotropicOperator,
    pub rhs: RhsSpec,
    pub domain: CapSpec,
    pub grid: GridSpec,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub verification: VerificationSettings,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

/// Output of [`RunConfig::solve`].
#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    Grid(GridField),
    Radial(RadialField),
}

impl Solution {
    /// The solution on the configured polar grid.
    pub fn to_grid(&self, ntheta: usize) -> Result<GridField> {
        match self {
            Solution::Grid(g) => Ok(g.clone()),
            Solution::Radial(r) => r.to_grid(ntheta),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        self.rhs.validate()?;
        self.cap()?;
        self.polar_grid()?;
        self.settings().validate()?;
        self.verification.validate()
    }

    pub fn cap(&self) -> Result<CapDomain> {
        CapDomain::from_spec(&self.domain)
    }

    pub fn polar_grid(&self) -> Result<PolarGrid> {
        PolarGrid::new(self.grid.nr, self.grid.ntheta, self.domain.radius)
    }

    pub fn settings(&self) -> SolveSettings {
        SolveSettings {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    pub fn solve(&self) -> Result<(Solution, SolveStats)> {
        self.validate()?;
        match self.mode {
            SolverMode::Semilinear2d => {
                let (u, stats) = solve_semilinear(
                    &self.operator,
                    &self.rhs,
                    self.polar_grid()?,
                    &self.settings(),
                )?;
                Ok((Solution::Grid(u), stats))
            }
            SolverMode::RadialFullyNonlinear1d => {
                let (u, stats) = solve_radial(
                    &self.operator,
                    &self.rhs,
                    self.domain.radius,
                    self.grid.nr,
                    &self.settings(),
                )?;
                Ok((Solution::Radial(u), stats))
            }
        }
    }
}
