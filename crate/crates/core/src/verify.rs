//! Sampling-based certification of concavity on a cap: the two-point
//! function `Z(x, y) = u(γ(0)) - (u(x) + u(y)) / 2`, second differences
//! along geodesics, the boundary margin and the gradient-norm inequality at
//! minimizers of `Z`.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cap::CapDomain;
use crate::config::VerificationSettings;
use crate::error::{Error, Result};
use crate::field::{CosineField, ScalarField};
use crate::geometry::{
    distance, exp_map, tangent_basis, GeodesicSegment, SpherePoint, TangentVector,
};
use crate::jacobi::PairDirection;
use crate::operators::{
    check_b_hypotheses, check_f_hypotheses, trial_rng, HypothesisReport, IsotropicOperator, RhsSpec,
};
use crate::solver::{GridField, GridInterpolant, PolarGrid};

/// Tolerance on `min Z` for fields evaluated exactly.
pub const ANALYTIC_TOLERANCE: f64 = 1e-12;
/// Boundary pairs closer than this are left out of the margin.
pub const BOUNDARY_EXCLUSION: f64 = 1e-3;
/// Cap on the number of grid-node pairs added to the random pairs.
pub const MAX_NODE_PAIRS: usize = 1_000_000;
pub const GRADIENT_NORM_TOL: f64 = 1e-8;
/// Factor between the observed interpolation error and the grid tolerance.
pub const GRID_TOLERANCE_FACTOR: f64 = 10.0;

const NODE_STREAM: u64 = 1 << 40;
const BOUNDARY_STREAM: u64 = 2 << 40;
const GEODESIC_STREAM: u64 = 3 << 40;
const TOLERANCE_STREAM: u64 = 4 << 40;

fn coords3(p: &SpherePoint) -> Result<[f64; 3]> {
    let c = p.coords();
    if c.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: c.len(),
        });
    }
    Ok([c[0], c[1], c[2]])
}

fn check_in_cap(cap: &CapDomain, p: &SpherePoint) -> Result<()> {
    if cap.contains(p) {
        Ok(())
    } else {
        Err(Error::OutsideCap {
            distance: distance(cap.pole(), p)?,
            radius: cap.radius(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub x: [f64; 3],
    pub y: [f64; 3],
    /// Geodesic midpoint.
    pub z: [f64; 3],
    /// `Z(x, y)`.
    pub value: f64,
}

fn midpoint(cap: &CapDomain, x: &SpherePoint, y: &SpherePoint) -> Result<SpherePoint> {
    check_in_cap(cap, x)?;
    check_in_cap(cap, y)?;
    let z = GeodesicSegment::new(x, y)?.point(0.0)?;
    check_in_cap(cap, &z)?;
    Ok(z)
}

pub fn two_point_z(
    u: &dyn ScalarField,
    cap: &CapDomain,
    x: &SpherePoint,
    y: &SpherePoint,
) -> Result<f64> {
    let z = midpoint(cap, x, y)?;
    Ok(u.value(&z)? - 0.5 * (u.value(x)? + u.value(y)?))
}

/// `Z(x, y)` together with `|Z(x, y) - Z(y, x)|`.
fn pair_sample(
    u: &dyn ScalarField,
    cap: &CapDomain,
    x: &SpherePoint,
    y: &SpherePoint,
) -> Result<(PairSample, f64)> {
    let z = midpoint(cap, x, y)?;
    let value = u.value(&z)? - 0.5 * (u.value(x)? + u.value(y)?);
    let swapped = two_point_z(u, cap, y, x)?;
    if !value.is_finite() {
        return Err(Error::NonFinite("two-point function"));
    }
    Ok((
        PairSample {
            x: coords3(x)?,
            y: coords3(y)?,
            z: coords3(&z)?,
            value,
        },
        (value - swapped).abs(),
    ))
}

enum PairSource {
    Random {
        seed: u64,
        count: usize,
    },
    AllNodes {
        pairs: Vec<(u32, u32)>,
    },
    SampledNodes {
        seed: u64,
        count: usize,
        nodes: usize,
    },
}

struct PairPlan {
    random: usize,
    nodes: Vec<SpherePoint>,
    sources: Vec<PairSource>,
}

impl PairPlan {
    fn new(u: &dyn ScalarField, num_pairs: usize, seed: u64) -> Self {
        let nodes = u.nodes();
        let m = nodes.len();
        let mut sources = vec![PairSource::Random {
            seed,
            count: num_pairs,
        }];
        if m >= 2 {
            let total = m * (m - 1) / 2;
            if total <= MAX_NODE_PAIRS {
                let pairs = (0..m as u32)
                    .flat_map(|i| (i + 1..m as u32).map(move |j| (i, j)))
                    .collect();
                sources.push(PairSource::AllNodes { pairs });
            } else {
                sources.push(PairSource::SampledNodes {
                    seed,
                    count: MAX_NODE_PAIRS,
                    nodes: m,
                });
            }
        }
        Self {
            random: num_pairs,
            nodes,
            sources,
        }
    }

    fn len(&self) -> usize {
        self.sources
            .iter()
            .map(|s| match s {
                PairSource::Random { count, .. } | PairSource::SampledNodes { count, .. } => *count,
                PairSource::AllNodes { pairs } => pairs.len(),
            })
            .sum()
    }

    fn pair(&self, cap: &CapDomain, mut k: usize) -> (SpherePoint, SpherePoint) {
        for source in &self.sources {
            match source {
                PairSource::Random { seed, count } => {
                    if k < *count {
                        let mut rng = trial_rng(*seed, k);
                        let x = cap.sample_uniform(&mut rng);
                        let y = cap.sample_uniform(&mut rng);
                        return (x, y);
                    }
                    k -= count;
                }
                PairSource::AllNodes { pairs } => {
                    if k < pairs.len() {
                        let (i, j) = pairs[k];
                        return (
                            self.nodes[i as usize].clone(),
                            self.nodes[j as usize].clone(),
                        );
                    }
                    k -= pairs.len();
                }
                PairSource::SampledNodes { seed, count, nodes } => {
                    if k < *count {
                        let mut rng = trial_rng(*seed, (NODE_STREAM + k as u64) as usize);
                        let i = rng.gen_range(0..*nodes);
                        let j = (i + rng.gen_range(1..*nodes)) % nodes;
                        return (self.nodes[i].clone(), self.nodes[j].clone());
                    }
                    k -= count;
                }
            }
        }
        unreachable!("pair index beyond plan")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScan {
    pub min_z: f64,
    pub argmin: PairSample,
    pub num_random_pairs: usize,
    pub num_node_pairs: usize,
    /// Largest `|Z(x, y) - Z(y, x)|` seen; zero when the midpoint is exactly
    /// symmetric.
    pub symmetry_defect: f64,
}

/// The uniform random pairs of [`scan_z_min`], in scan order. Grid-node
/// pairs (all of them, or a random subset of [`MAX_NODE_PAIRS`]) are scanned
/// too but not returned.
pub fn sample_pairs(
    u: &dyn ScalarField,
    cap: &CapDomain,
    num_pairs: usize,
    seed: u64,
) -> Result<Vec<PairSample>> {
    let plan = PairPlan::new(u, num_pairs, seed);
    (0..plan.random)
        .into_par_iter()
        .map(|k| {
            let (x, y) = plan.pair(cap, k);
            pair_sample(u, cap, &x, &y).map(|(s, _)| s)
        })
        .collect()
}

pub fn scan_z_min(
    u: &dyn ScalarField,
    cap: &CapDomain,
    num_pairs: usize,
    seed: u64,
) -> Result<ZScan> {
    if num_pairs == 0 {
        return Err(Error::Precondition("need at least one pair".into()));
    }
    let plan = PairPlan::new(u, num_pairs, seed);
    let total = plan.len();
    let best = (0..total)
        .into_par_iter()
        .map(|k| {
            let (x, y) = plan.pair(cap, k);
            pair_sample(u, cap, &x, &y).map(|(s, defect)| (k, s, defect))
        })
        .try_reduce_with(|a, b| {
            let defect = a.2.max(b.2);
            let keep_a = a.1.value < b.1.value || (a.1.value == b.1.value && a.0 < b.0);
            Ok(if keep_a {
                (a.0, a.1, defect)
            } else {
                (b.0, b.1, defect)
            })
        })
        .expect("at least one pair")?;
    Ok(ZScan {
        min_z: best.1.value,
        argmin: best.1,
        num_random_pairs: plan.random,
        num_node_pairs: total - plan.random,
        symmetry_defect: best.2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryWitness {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMargin {
    /// Minimum of `Du_x(γ̇(-1)) - Du_y(γ̇(1))` over the sampled pairs.
    pub min: f64,
    pub witness: BoundaryWitness,
    pub samples: usize,
    /// Pairs with `d(x, y) <` [`BOUNDARY_EXCLUSION`], left out.
    pub excluded: usize,
    pub exclusion_distance: f64,
}

fn margin_at(u: &dyn ScalarField, x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    let seg = GeodesicSegment::new(x, y)?;
    let vx = seg.velocity(-1.0)?;
    let vy = seg.velocity(1.0)?;
    let (_, gx) = u.value_and_gradient(x)?;
    let (_, gy) = u.value_and_gradient(y)?;
    Ok(gx.dot(vx.vec()) - gy.dot(vy.vec()))
}

/// `x` uniform on `∂Ω`; for each, `num_interior` partners `y` of which every
/// fourth lies on `∂Ω` and the rest are uniform in the cap.
pub fn boundary_margin(
    u: &dyn ScalarField,
    cap: &CapDomain,
    num_boundary: usize,
    num_interior: usize,
    seed: u64,
) -> Result<BoundaryMargin> {
    if num_boundary == 0 || num_interior == 0 {
        return Err(Error::Precondition(
            "need boundary and partner samples".into(),
        ));
    }
    let per_point: Vec<(Option<BoundaryWitness>, usize, usize)> = (0..num_boundary)
        .into_par_iter()
        .map(|b| -> Result<_> {
            let mut rng = trial_rng(seed, (BOUNDARY_STREAM + b as u64) as usize);
            let x = cap.sample_boundary(&mut rng);
            let mut best: Option<BoundaryWitness> = None;
            let (mut used, mut excluded) = (0, 0);
            for k in 0..num_interior {
                let y = if k % 4 == 3 {
                    cap.sample_boundary(&mut rng)
                } else {
                    cap.sample_uniform(&mut rng)
                };
                if distance(&x, &y)? < BOUNDARY_EXCLUSION {
                    excluded += 1;
                    continue;
                }
                used += 1;
                let value = margin_at(u, &x, &y)?;
                if best.as_ref().is_none_or(|w| value < w.value) {
                    best = Some(BoundaryWitness {
                        x: coords3(&x)?,
                        y: coords3(&y)?,
                        value,
                    });
                }
            }
            Ok((best, used, excluded))
        })
        .collect::<Result<_>>()?;
    let samples = per_point.iter().map(|p| p.1).sum();
    let excluded = per_point.iter().map(|p| p.2).sum();
    let witness = per_point
        .into_iter()
        .filter_map(|p| p.0)
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .ok_or_else(|| Error::Precondition("every boundary pair was excluded".into()))?;
    Ok(BoundaryMargin {
        min: witness.value,
        witness,
        samples,
        excluded,
        exclusion_distance: BOUNDARY_EXCLUSION,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicWitness {
    pub x: [f64; 3],
    pub y: [f64; 3],
    /// Parameter of the worst centred difference.
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicScan {
    /// Largest `u(γ(t-δ)) - 2u(γ(t)) + u(γ(t+δ))` over all samples.
    pub worst: f64,
    pub witness: GeodesicWitness,
    pub num_geodesics: usize,
    pub num_t: usize,
}

/// Centred second differences of `t ↦ u(γ(t))` on `num_t` equally spaced
/// parameters in `[-1, 1]`, for random pairs in the cap.
pub fn geodesic_concavity_scan(
    u: &dyn ScalarField,
    cap: &CapDomain,
    num_geodesics: usize,
    num_t: usize,
    seed: u64,
) -> Result<GeodesicScan> {
    if num_t < 5 {
        return Err(Error::Precondition(
            "need at least 5 samples per geodesic".into(),
        ));
    }
    if num_geodesics == 0 {
        return Err(Error::Precondition("need at least one geodesic".into()));
    }
    let ts: Vec<f64> = (0..num_t)
        .map(|k| -1.0 + 2.0 * k as f64 / (num_t - 1) as f64)
        .collect();
    let witnesses: Vec<GeodesicWitness> = (0..num_geodesics)
        .into_par_iter()
        .map(|g| -> Result<GeodesicWitness> {
            let mut rng = trial_rng(seed, (GEODESIC_STREAM + g as u64) as usize);
            let x = cap.sample_uniform(&mut rng);
            let y = cap.sample_uniform(&mut rng);
            let seg = GeodesicSegment::new(&x, &y)?;
            let values = ts
                .iter()
                .map(|&t| {
                    let p = seg.point(t)?;
                    check_in_cap(cap, &p)?;
                    u.value(&p)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (k, value) = (1..num_t - 1)
                .map(|k| (k, values[k - 1] - 2.0 * values[k] + values[k + 1]))
                .fold((1, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            Ok(GeodesicWitness {
                x: coords3(&x)?,
                y: coords3(&y)?,
                t: ts[k],
                value,
            })
        })
        .collect::<Result<_>>()?;
    let witness = witnesses
        .into_iter()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .expect("at least one geodesic");
    Ok(GeodesicScan {
        worst: witness.value,
        witness,
        num_geodesics,
        num_t,
    })
}

/// `Z(x, y)` and its Riemannian gradient in `(x, y)`, from the closed-form
/// Jacobi fields: moving `x` along `v` moves the midpoint along `J(0)`,
/// `J` the Jacobi field with `J(-1) = v`, `J(1) = 0`.
fn z_with_gradient(
    u: &dyn ScalarField,
    x: &SpherePoint,
    y: &SpherePoint,
) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    let seg = GeodesicSegment::new(x, y)?;
    let z = seg.point(0.0)?;
    let (uz, gz) = u.value_and_gradient(&z)?;
    let (ux, gx) = u.value_and_gradient(x)?;
    let (uy, gy) = u.value_and_gradient(y)?;
    let value = uz - 0.5 * (ux + uy);
    let dim = x.ambient_dim();
    if seg.is_degenerate() {
        return Ok((value, DVector::zeros(dim), DVector::zeros(dim)));
    }
    let mut grad_x = DVector::zeros(dim);
    let mut grad_y = DVector::zeros(dim);
    for (point, own, grad, at_x) in [(x, &gx, &mut grad_x, true), (y, &gy, &mut grad_y, false)] {
        for e in tangent_basis(point) {
            let v = TangentVector::new(point.clone(), e.clone())?;
            let dir = if at_x {
                PairDirection::at_x(&v)
            } else {
                PairDirection::at_y(&v)
            };
            let jz = dir.jacobi_field(&seg)?.at(0.0)?;
            let d = gz.dot(jz.vec()) - 0.5 * own.dot(&e);
            *grad += e * d;
        }
    }
    Ok((value, grad_x, grad_y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientNormCheck {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub z_value: f64,
    pub distance: f64,
    /// Norm of the gradient of `Z` at the refined pair.
    pub first_order_residual: f64,
    pub refinement_steps: usize,
    pub grad_norm_x: f64,
    pub grad_norm_y: f64,
    pub grad_norm_z: f64,
    /// `|∇u_z| - |∇u_x|`.
    pub excess: f64,
    /// `| |∇u_x| - |∇u_y| |`.
    pub mismatch: f64,
    pub tolerance: f64,
    pub passed: bool,
}

const MAX_REFINEMENT_STEPS: usize = 2_000;

/// Moves `(x, y)` towards a critical point of `Z` by gradient descent on
/// `S² × S²`, accepting steps that reduce `|∇Z|` and keeping both points in
/// the cap. Returns the refined pair and the number of accepted steps.
pub fn refine_minimizer(
    u: &dyn ScalarField,
    cap: &CapDomain,
    x: &SpherePoint,
    y: &SpherePoint,
) -> Result<(SpherePoint, SpherePoint, usize)> {
    let (mut x, mut y) = (x.clone(), y.clone());
    let (_, mut gx, mut gy) = z_with_gradient(u, &x, &y)?;
    let mut gnorm = (gx.norm_squared() + gy.norm_squared()).sqrt();
    let mut alpha = 1.0;
    let mut steps = 0;
    while steps < MAX_REFINEMENT_STEPS && gnorm > 1e-15 {
        let mut accepted = false;
        while alpha > 1e-12 {
            let xn = exp_map(&TangentVector::new(x.clone(), &gx * -alpha)?);
            let yn = exp_map(&TangentVector::new(y.clone(), &gy * -alpha)?);
            if cap.contains(&xn) && cap.contains(&yn) {
                let (_, nx, ny) = z_with_gradient(u, &xn, &yn)?;
                let nnorm = (nx.norm_squared() + ny.norm_squared()).sqrt();
                if nnorm < gnorm {
                    (x, y, gx, gy, gnorm) = (xn, yn, nx, ny, nnorm);
                    accepted = true;
                    alpha *= 2.0;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        steps += 1;
    }
    Ok((x, y, steps))
}

/// Refines `(x, y)` to a nearby critical point of `Z` and compares gradient
/// norms at `x`, `y` and the midpoint.
pub fn gradient_norm_check(
    u: &dyn ScalarField,
    cap: &CapDomain,
    x: &SpherePoint,
    y: &SpherePoint,
) -> Result<GradientNormCheck> {
    let (x, y, steps) = refine_minimizer(u, cap, x, y)?;
    let (z_value, rx, ry) = z_with_gradient(u, &x, &y)?;
    let z = GeodesicSegment::new(&x, &y)?.point(0.0)?;
    let nx = u.value_and_gradient(&x)?.1.norm();
    let ny = u.value_and_gradient(&y)?.1.norm();
    let nz = u.value_and_gradient(&z)?.1.norm();
    let excess = nz - nx;
    let mismatch = (nx - ny).abs();
    Ok(GradientNormCheck {
        x: coords3(&x)?,
        y: coords3(&y)?,
        z_value,
        distance: distance(&x, &y)?,
        first_order_residual: (rx.norm_squared() + ry.norm_squared()).sqrt(),
        refinement_steps: steps,
        grad_norm_x: nx,
        grad_norm_y: ny,
        grad_norm_z: nz,
        excess,
        mismatch,
        tolerance: GRADIENT_NORM_TOL,
        passed: excess <= GRADIENT_NORM_TOL && mismatch <= GRADIENT_NORM_TOL,
    })
}

/// Declared tolerance for a field on `grid`: [`GRID_TOLERANCE_FACTOR`] times
/// the worst interpolation error of the manufactured solution
/// `cos d - cos R` sampled at nodes of the same grid.
pub fn grid_tolerance(grid: &PolarGrid, cap: &CapDomain) -> Result<f64> {
    let exact = CosineField::new(cap.pole().clone(), 1.0, -cap.radius().cos());
    let nodal = GridField::from_fn(*grid, |r, _| r.cos() - cap.radius().cos())?;
    let interp = GridInterpolant::new(nodal, cap.clone())?;
    let mut rng = trial_rng(0, TOLERANCE_STREAM as usize);
    let mut worst = 0.0f64;
    for _ in 0..4096 {
        let x = cap.sample_uniform(&mut rng);
        worst = worst.max((interp.value(&x)? - exact.value(&x)?).abs());
    }
    Ok(GRID_TOLERANCE_FACTOR * worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub f: HypothesisReport,
    pub b: HypothesisReport,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub min_z: f64,
    pub argmin: PairSample,
    pub num_pairs: usize,
    pub num_node_pairs: usize,
    pub symmetry_defect: f64,
    pub boundary_margin: f64,
    pub boundary_witness: BoundaryWitness,
    pub boundary_samples: usize,
    pub boundary_excluded: usize,
    pub boundary_exclusion_distance: f64,
    pub geodesic_scan_worst: f64,
    pub geodesic_witness: GeodesicWitness,
    pub num_geodesics: usize,
    pub hypotheses: Hypotheses,
    pub tolerance: f64,
    pub seed: u64,
    pub verdict: Verdict,
    /// Which parts of the verdict failed.
    pub failures: Vec<String>,
}

/// Runs every check. The verdict passes iff the sampled hypotheses on `f`
/// and `b` hold, `min Z >= -tolerance` and the boundary margin is positive.
pub fn full_report(
    operator: &IsotropicOperator,
    rhs: &RhsSpec,
    cap: &CapDomain,
    u: &dyn ScalarField,
    settings: &VerificationSettings,
    tolerance: f64,
) -> Result<ConcavityReport> {
    settings.validate()?;
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        return Err(Error::Domain {
            value: tolerance,
            domain: "verification tolerance [0, inf)",
        });
    }
    let seed = settings.seed;
    let f = check_f_hypotheses(operator, settings.hypothesis_trials, seed)?;
    let b = check_b_hypotheses(rhs, cap, settings.hypothesis_trials, seed)?;
    let scan = scan_z_min(u, cap, settings.num_pairs, seed)?;
    let margin = boundary_margin(u, cap, settings.num_boundary, settings.num_interior, seed)?;
    let geo = geodesic_concavity_scan(u, cap, settings.num_geodesics, settings.num_t, seed)?;

    let mut failures = Vec::new();
    if !f.passed {
        failures.push("hypotheses on f".to_string());
    }
    if !b.passed {
        failures.push("hypotheses on b".to_string());
    }
    if scan.min_z < -tolerance {
        failures.push(format!("min Z = {:e} below -{:e}", scan.min_z, tolerance));
    }
    if !(margin.min > 0.0) {
        failures.push(format!("boundary margin {:e} not positive", margin.min));
    }
    let verdict = if failures.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let hyp_passed = f.passed && b.passed;
    Ok(ConcavityReport {
        min_z: scan.min_z,
        argmin: scan.argmin,
        num_pairs: scan.num_random_pairs,
        num_node_pairs: scan.num_node_pairs,
        symmetry_defect: scan.symmetry_defect,
        boundary_margin: margin.min,
        boundary_witness: margin.witness,
        boundary_samples: margin.samples,
        boundary_excluded: margin.excluded,
        boundary_exclusion_distance: margin.exclusion_distance,
        geodesic_scan_worst: geo.worst,
        geodesic_witness: geo.witness,
        num_geodesics: geo.num_geodesics,
        hypotheses: Hypotheses {
            f,
            b,
            passed: hyp_passed,
        },
        tolerance,
        seed,
        verdict,
        failures,
    })
}
