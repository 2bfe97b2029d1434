//! Concrete left-hand sides `f(p, W) = φ(p) + tr ψ(W)` and right-hand sides
//! `b(x, u, p) = c(x) - λ u - μ p`, with randomized checkers for the
//! monotonicity, convexity and concavity hypotheses the concavity estimate
//! needs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cap::CapDomain;
use crate::error::{Error, Result};
use crate::geometry::{distance, GeodesicSegment, SpherePoint};
use crate::spectral::{eigen_sym, with_spectrum, SymmetricMatrix};

/// Sampled hypothesis violations at or below this level count as passes.
pub const HYPOTHESIS_TOL: f64 = 1e-12;

/// Eigenvalues in the closed positive cone may undershoot zero by this much.
pub const CONE_SLACK: f64 = 1e-12;

/// Scalar function applied to each eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Psi {
    Identity,
    Exp,
    /// `s^p` on `s >= 0`, requires `p >= 1`.
    Power {
        p: f64,
    },
    /// `-exp(-s)`: increasing but concave.
    NegExpNeg,
    /// Piecewise linear through `(knots[i], values[i])`.
    Table {
        knots: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Psi {
    pub fn validate(&self) -> Result<()> {
        match self {
            Psi::Power { p } if !(*p >= 1.0 && p.is_finite()) => Err(Error::Precondition(format!(
                "power psi needs p >= 1, got {p}"
            ))),
            Psi::Table { knots, values } => validate_table(knots, values, "psi table"),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        match self {
            Psi::Identity => Ok(s),
            Psi::Exp => Ok(s.exp()),
            Psi::Power { p } => {
                if s < -CONE_SLACK {
                    return Err(Error::Domain {
                        value: s,
                        domain: "power psi domain [0, inf)",
                    });
                }
                Ok(s.max(0.0).powf(*p))
            }
            Psi::NegExpNeg => Ok(-(-s).exp()),
            Psi::Table { knots, values } => interpolate_table(knots, values, s, "psi table range"),
        }
    }

    /// Natural domain of `ψ`, intersected with nothing.
    fn domain(&self) -> (f64, f64) {
        match self {
            Psi::Power { .. } => (0.0, f64::INFINITY),
            Psi::Table { knots, .. } => (knots[0], *knots.last().unwrap()),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

fn validate_table(knots: &[f64], values: &[f64], what: &str) -> Result<()> {
    if knots.len() < 2 || knots.len() != values.len() {
        return Err(Error::Precondition(format!(
            "{what} needs at least two knots and matching values"
        )));
    }
    if knots.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition(format!(
            "{what} knots must increase strictly"
        )));
    }
    if knots.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("table entries"));
    }
    Ok(())
}

fn interpolate_table(knots: &[f64], values: &[f64], s: f64, domain: &'static str) -> Result<f64> {
    let (lo, hi) = (knots[0], knots[knots.len() - 1]);
    let slack = 1e-12 * (hi - lo).max(1.0);
    if !(s >= lo - slack && s <= hi + slack) {
        return Err(Error::Domain { value: s, domain });
    }
    let s = s.clamp(lo, hi);
    let idx = knots.partition_point(|k| *k <= s).clamp(1, knots.len() - 1);
    let (k0, k1) = (knots[idx - 1], knots[idx]);
    let w = (s - k0) / (k1 - k0);
    Ok(values[idx - 1] * (1.0 - w) + values[idx] * w)
}

/// Gradient-norm part of the operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Phi {
    Zero,
    Linear { slope: f64 },
}

impl Phi {
    pub fn eval(&self, p: f64) -> f64 {
        match self {
            Phi::Zero => 0.0,
            Phi::Linear { slope } => slope * p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cone {
    /// All of `R^n`.
    All,
    /// Closure of the positive cone.
    Positive,
}

impl Cone {
    fn name(self) -> &'static str {
        match self {
            Cone::All => "R^n",
            Cone::Positive => "closed positive cone",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsotropicOperator {
    pub psi: Psi,
    #[serde(default = "default_phi")]
    pub phi: Phi,
    #[serde(default = "default_cone")]
    pub cone: Cone,
}

fn default_phi() -> Phi {
    Phi::Zero
}

fn default_cone() -> Cone {
    Cone::All
}

impl IsotropicOperator {
    pub fn new(psi: Psi, phi: Phi, cone: Cone) -> Result<Self> {
        psi.validate()?;
        Ok(Self { psi, phi, cone })
    }

    /// `f = -Δ` on `S^n`.
    pub fn laplacian() -> Self {
        Self {
            psi: Psi::Identity,
            phi: Phi::Zero,
            cone: Cone::All,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.psi.validate()
    }

    fn check_cone(&self, kappa: f64) -> Result<()> {
        if !kappa.is_finite() {
            return Err(Error::NonFinite("operator eigenvalue"));
        }
        if self.cone == Cone::Positive && kappa < -CONE_SLACK {
            return Err(Error::Cone {
                value: kappa,
                cone: self.cone.name(),
            });
        }
        Ok(())
    }

    /// `φ(p) + Σ ψ(κ_i)` for a given spectrum. Every evaluation of `f`
    /// funnels through here, so matrix and eigenvalue inputs agree exactly.
    pub fn eval_spectrum(&self, p: f64, eigenvalues: &[f64]) -> Result<f64> {
        if !(p >= 0.0) {
            return Err(Error::Domain {
                value: p,
                domain: "gradient norm [0, inf)",
            });
        }
        let mut sum = self.phi.eval(p);
        for &k in eigenvalues {
            self.check_cone(k)?;
            sum += self.psi.eval(k)?;
        }
        Ok(sum)
    }

    /// `f(p, W)` through the symmetric eigensolver.
    pub fn eval_f(&self, p: f64, w: &SymmetricMatrix) -> Result<f64> {
        let spec = eigen_sym(w)?;
        self.eval_spectrum(p, &spec.eigenvalues)
    }

    /// Interval from which test eigenvalues are drawn.
    fn sampling_interval(&self) -> (f64, f64) {
        let (mut lo, mut hi) = self.psi.domain();
        if self.cone == Cone::Positive {
            lo = lo.max(0.0);
        }
        lo = lo.max(-2.0);
        hi = hi.min(2.0);
        if hi <= lo {
            hi = lo + 1.0;
        }
        (lo, hi)
    }
}

/// Spherically symmetric forcing `c(x) = c(d(x, pole))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Forcing {
    Constant {
        value: f64,
    },
    /// `a cos d + k`.
    CosDist {
        a: f64,
        k: f64,
    },
    /// `a exp(cos d) + b cos d + k`.
    ExpCosDist {
        a: f64,
        b: f64,
        k: f64,
    },
    /// Piecewise linear in `d` through `(distances[i], values[i])`.
    Table {
        distances: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Forcing {
    pub fn validate(&self) -> Result<()> {
        match self {
            Forcing::Table { distances, values } => {
                validate_table(distances, values, "forcing table")
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, d: f64) -> Result<f64> {
        match self {
            Forcing::Constant { value } => Ok(*value),
            Forcing::CosDist { a, k } => Ok(a * d.cos() + k),
            Forcing::ExpCosDist { a, b, k } => {
                let c = d.cos();
                Ok(a * c.exp() + b * c + k)
            }
            Forcing::Table { distances, values } => {
                interpolate_table(distances, values, d, "forcing table range")
            }
        }
    }
}

/// `b(x, u, p) = c(x) - λ u - μ p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsSpec {
    pub c: Forcing,
    pub lambda: f64,
    #[serde(default)]
    pub mu: f64,
}

impl RhsSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || !self.mu.is_finite() {
            return Err(Error::NonFinite("rhs coefficients"));
        }
        self.c.validate()
    }

    /// `b` at distance `d` from the pole.
    pub fn eval_radial(&self, d: f64, u: f64, p: f64) -> Result<f64> {
        Ok(self.c.eval(d)? - self.lambda * u - self.mu * p)
    }

    /// `∂b/∂u` and `∂b/∂p`.
    pub fn derivatives(&self) -> (f64, f64) {
        (-self.lambda, -self.mu)
    }
}

pub fn eval_b(rhs: &RhsSpec, pole: &SpherePoint, x: &SpherePoint, u: f64, p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::Domain {
            value: p,
            domain: "gradient norm [0, inf)",
        });
    }
    rhs.eval_radial(distance(pole, x)?, u, p)
}

/// A sample that realises the worst value of a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub trial: usize,
    pub description: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    /// `max(lhs - rhs)` over samples of an inequality `lhs <= rhs`; for a
    /// strict inequality the check passes only when this is negative.
    pub worst_violation: f64,
    pub strict: bool,
    pub passed: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<HypothesisCheck>,
    pub passed: bool,
}

impl HypothesisReport {
    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Per-trial generator: independent stream per trial, so results do not
/// depend on how trials are scheduled.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

struct Sample {
    violation: f64,
    values: Vec<f64>,
}

fn reduce_check(
    name: &str,
    strict: bool,
    description: &str,
    samples: impl Iterator<Item = (usize, Sample)>,
) -> HypothesisCheck {
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for (trial, s) in samples {
        if s.violation.is_nan() || s.violation > worst {
            worst = if s.violation.is_nan() {
                f64::INFINITY
            } else {
                s.violation
            };
            witness = Some(Witness {
                trial,
                description: description.to_string(),
                values: s.values,
            });
        }
    }
    let passed = if strict {
        worst < 0.0
    } else {
        worst <= HYPOTHESIS_TOL
    };
    HypothesisCheck {
        name: name.to_string(),
        worst_violation: worst,
        strict,
        passed,
        witness,
    }
}

fn assemble(trials: usize, seed: u64, checks: Vec<HypothesisCheck>) -> HypothesisReport {
    let passed = checks.iter().all(|c| c.passed);
    HypothesisReport {
        trials,
        seed,
        checks,
        passed,
    }
}

fn sample_spectrum(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(lo..=hi)).collect()
}

struct FTrial {
    gradient: Sample,
    eigen: Sample,
    convex: Sample,
    shape_increasing: Sample,
    shape_convex: Sample,
}

fn f_trial(op: &IsotropicOperator, rng: &mut ChaCha8Rng) -> Result<FTrial> {
    let dim = rng.gen_range(2..=4);
    let (lo, hi) = op.sampling_interval();

    let mut pq = [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)];
    pq.sort_by(f64::total_cmp);
    let w = with_spectrum(&sample_spectrum(rng, dim, lo, hi), rng);
    let gradient = Sample {
        violation: op.eval_f(pq[0], &w)? - op.eval_f(pq[1], &w)?,
        values: pq.to_vec(),
    };

    let p = rng.gen_range(0.0..3.0);
    let kappa = sample_spectrum(rng, dim, lo, hi);
    let lambda: Vec<f64> = kappa
        .iter()
        .map(|k| (k + rng.gen_range(0.0..1.0)).min(hi))
        .collect();
    let eigen = Sample {
        violation: op.eval_spectrum(p, &kappa)? - op.eval_spectrum(p, &lambda)?,
        values: kappa.iter().chain(&lambda).cloned().collect(),
    };

    let a = with_spectrum(&sample_spectrum(rng, dim, lo, hi), rng);
    let b = with_spectrum(&sample_spectrum(rng, dim, lo, hi), rng);
    let mid = a.combine(0.5, &b, 0.5)?;
    let fa = op.eval_f(p, &a)?;
    let fb = op.eval_f(p, &b)?;
    let convex = Sample {
        violation: op.eval_f(p, &mid)? - 0.5 * (fa + fb),
        values: vec![p, fa, fb],
    };

    let s = rng.gen_range(lo..=hi);
    let h = 1e-2 * (hi - lo);
    let s_lo = (s - h).max(lo);
    let s_hi = (s + h).min(hi);
    let s_mid = 0.5 * (s_lo + s_hi);
    let psi = &op.psi;
    let shape_increasing = Sample {
        violation: psi.eval(s_lo)? - psi.eval(s_hi)?,
        values: vec![s_lo, s_hi],
    };
    let shape_convex = Sample {
        violation: 2.0 * psi.eval(s_mid)? - psi.eval(s_lo)? - psi.eval(s_hi)?,
        values: vec![s_lo, s_mid, s_hi],
    };
    Ok(FTrial {
        gradient,
        eigen,
        convex,
        shape_increasing,
        shape_convex,
    })
}

/// Randomized check of monotonicity in `p`, monotonicity in the eigenvalues,
/// midpoint convexity in `W`, and the sampled shape of `ψ`.
pub fn check_f_hypotheses(
    op: &IsotropicOperator,
    trials: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    if trials == 0 {
        return Err(Error::Precondition("need at least one trial".into()));
    }
    op.validate()?;
    let results: Vec<FTrial> = (0..trials)
        .into_par_iter()
        .map(|t| f_trial(op, &mut trial_rng(seed, t)))
        .collect::<Result<_>>()?;

    let mut gradient = Vec::with_capacity(trials);
    let mut eigen = Vec::with_capacity(trials);
    let mut convex = Vec::with_capacity(trials);
    let mut inc = Vec::with_capacity(trials);
    let mut cvx = Vec::with_capacity(trials);
    for (t, r) in results.into_iter().enumerate() {
        gradient.push((t, r.gradient));
        eigen.push((t, r.eigen));
        convex.push((t, r.convex));
        inc.push((t, r.shape_increasing));
        cvx.push((t, r.shape_convex));
    }
    let checks = vec![
        reduce_check(
            "monotone_in_gradient",
            false,
            "f(p, W) - f(q, W) for p <= q; values = [p, q]",
            gradient.into_iter(),
        ),
        reduce_check(
            "monotone_in_eigenvalues",
            false,
            "f(diag k) - f(diag l) for k <= l; values = k ++ l",
            eigen.into_iter(),
        ),
        reduce_check(
            "midpoint_convex",
            false,
            "f((A+B)/2) - (f(A)+f(B))/2; values = [p, f(A), f(B)]",
            convex.into_iter(),
        ),
        reduce_check(
            "psi_increasing",
            false,
            "psi(s) - psi(t) for s <= t; values = [s, t]",
            inc.into_iter(),
        ),
        reduce_check(
            "psi_convex",
            false,
            "2 psi(m) - psi(s) - psi(t) at the midpoint m; values = [s, m, t]",
            cvx.into_iter(),
        ),
    ];
    Ok(assemble(trials, seed, checks))
}

struct BTrial {
    concave: Sample,
    strict_u: Sample,
    monotone_p: Sample,
}

fn b_trial(rhs: &RhsSpec, cap: &CapDomain, rng: &mut ChaCha8Rng) -> Result<BTrial> {
    let pole = cap.pole();
    let x = cap.sample_uniform(rng);
    let y = cap.sample_uniform(rng);
    let z = GeodesicSegment::new(&x, &y)?.point(0.0)?;
    let ux = rng.gen_range(-2.0..2.0);
    let uy = rng.gen_range(-2.0..2.0);
    let p = rng.gen_range(0.0..3.0);
    let bx = eval_b(rhs, pole, &x, ux, p)?;
    let by = eval_b(rhs, pole, &y, uy, p)?;
    let bz = eval_b(rhs, pole, &z, 0.5 * (ux + uy), p)?;
    let concave = Sample {
        violation: 0.5 * (bx + by) - bz,
        values: x
            .coords()
            .iter()
            .chain(y.coords().iter())
            .cloned()
            .chain([ux, uy, p])
            .collect(),
    };

    let mut us = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
    us.sort_by(f64::total_cmp);
    if us[0] == us[1] {
        us[1] += 1e-3;
    }
    let strict_u = Sample {
        violation: eval_b(rhs, pole, &x, us[1], p)? - eval_b(rhs, pole, &x, us[0], p)?,
        values: vec![us[0], us[1], p],
    };

    let mut ps = [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)];
    ps.sort_by(f64::total_cmp);
    let monotone_p = Sample {
        violation: eval_b(rhs, pole, &x, ux, ps[1])? - eval_b(rhs, pole, &x, ux, ps[0])?,
        values: vec![ps[0], ps[1], ux],
    };
    Ok(BTrial {
        concave,
        strict_u,
        monotone_p,
    })
}

/// Randomized check on pairs in the cap: the midpoint concavity inequality
/// in `(x, u)`, strict decrease in `u`, and decrease in `p`.
pub fn check_b_hypotheses(
    rhs: &RhsSpec,
    cap: &CapDomain,
    trials: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    if trials == 0 {
        return Err(Error::Precondition("need at least one trial".into()));
    }
    rhs.validate()?;
    let results: Vec<BTrial> = (0..trials)
        .into_par_iter()
        .map(|t| b_trial(rhs, cap, &mut trial_rng(seed, t)))
        .collect::<Result<_>>()?;
    let mut concave = Vec::with_capacity(trials);
    let mut strict = Vec::with_capacity(trials);
    let mut mono = Vec::with_capacity(trials);
    for (t, r) in results.into_iter().enumerate() {
        concave.push((t, r.concave));
        strict.push((t, r.strict_u));
        mono.push((t, r.monotone_p));
    }
    let checks = vec![
        reduce_check(
            "jointly_concave",
            false,
            "(b(x,ux,p) + b(y,uy,p))/2 - b(z,(ux+uy)/2,p); values = x ++ y ++ [ux, uy, p]",
            concave.into_iter(),
        ),
        reduce_check(
            "strictly_decreasing_in_u",
            true,
            "b(x,v,p) - b(x,u,p) for u < v; values = [u, v, p]",
            strict.into_iter(),
        ),
        reduce_check(
            "decreasing_in_gradient",
            false,
            "b(x,u,q) - b(x,u,p) for p <= q; values = [p, q, u]",
            mono.into_iter(),
        ),
    ];
    Ok(assemble(trials, seed, checks))
}
