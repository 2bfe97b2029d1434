//! Randomized suites over the Jacobi-field closed form, the second endpoint
//! variations and the spectral ordering lemma.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cap::CapDomain;
use crate::error::{Error, Result};
use crate::geometry::{exp_map, GeodesicSegment, SpherePoint, TangentVector};
use crate::jacobi::{
    check_k_identities, fd_jacobi_oracle, k_grid, PairDirection, FD_STEP_FIRST, FD_STEP_SECOND,
};
use crate::operators::trial_rng;
use crate::spectral::{ordering_suite, MapKind, OrderingSuite};

pub const JACOBI_TOL: f64 = 1e-6;
pub const K_TOL: f64 = 1e-4;
pub const K_ENDPOINT_TOL: f64 = 1e-5;
pub const EV_K_TOL: f64 = 1e-4;
pub const ORDERING_TOL: f64 = 1e-10;

fn random_point<R: Rng + ?Sized>(ambient: usize, rng: &mut R) -> SpherePoint {
    loop {
        let v = DVector::from_fn(ambient, |_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return SpherePoint::new(v).expect("non-zero sample");
        }
    }
}

fn random_tangent<R: Rng + ?Sized>(p: &SpherePoint, rng: &mut R) -> TangentVector {
    let v = DVector::from_fn(p.ambient_dim(), |_, _| rng.gen_range(-1.0..1.0));
    TangentVector::new(p.clone(), v).expect("matching dimension")
}

/// Segment on `S^dim` from a random point with `|γ̇| = speed`.
pub fn random_segment<R: Rng + ?Sized>(
    dim: usize,
    speed: f64,
    rng: &mut R,
) -> Result<GeodesicSegment> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(Error::Domain {
            value: speed,
            domain: "segment speed (0, pi/2)",
        });
    }
    let x = random_point(dim + 1, rng);
    let v = loop {
        let t = random_tangent(&x, rng);
        if t.norm() > 1e-3 {
            break t;
        }
    };
    let v = v.scaled(2.0 * speed / v.norm());
    GeodesicSegment::new(&x, &exp_map(&v))
}

fn random_direction<R: Rng + ?Sized>(seg: &GeodesicSegment, rng: &mut R) -> PairDirection {
    let a = random_tangent(seg.start(), rng);
    let b = random_tangent(seg.end(), rng);
    PairDirection {
        at_x: a.into_vec(),
        at_y: b.into_vec(),
    }
}

/// Largest distance on [`k_grid`] between the closed-form Jacobi field and
/// its finite-difference oracle.
pub fn jacobi_deviation(seg: &GeodesicSegment, dir: &PairDirection, step: f64) -> Result<f64> {
    let ts = k_grid();
    let field = dir.jacobi_field(seg)?;
    let fd = fd_jacobi_oracle(seg.start(), seg.end(), dir, step, &ts)?;
    ts.iter().zip(&fd).try_fold(0.0f64, |m, (&t, o)| {
        Ok(m.max((field.at(t)?.vec() - o.vec()).norm()))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiSuite {
    pub trials: usize,
    pub step: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn summarize_jacobi(deviations: Vec<f64>, step: f64) -> JacobiSuite {
    let max_deviation = deviations.into_iter().fold(0.0, f64::max);
    JacobiSuite {
        trials: 0,
        step,
        max_deviation,
        tolerance: JACOBI_TOL,
        passed: max_deviation <= JACOBI_TOL,
    }
}

/// Random pairs in `cap` with random endpoint directions.
pub fn jacobi_suite_in_cap(
    cap: &CapDomain,
    trials: usize,
    seed: u64,
    step: f64,
) -> Result<JacobiSuite> {
    let deviations = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let seg = loop {
                let x = cap.sample_uniform(&mut rng);
                let y = cap.sample_uniform(&mut rng);
                let seg = GeodesicSegment::new(&x, &y)?;
                if !seg.is_degenerate() {
                    break seg;
                }
            };
            let dir = random_direction(&seg, &mut rng);
            jacobi_deviation(&seg, &dir, step)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JacobiSuite {
        trials,
        ..summarize_jacobi(deviations, step)
    })
}

/// Random segments of a fixed speed on `S^dim`.
pub fn jacobi_suite_at_speed(
    speed: f64,
    dim: usize,
    trials: usize,
    seed: u64,
    step: f64,
) -> Result<JacobiSuite> {
    let deviations = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let seg = random_segment(dim, speed, &mut rng)?;
            let dir = random_direction(&seg, &mut rng);
            jacobi_deviation(&seg, &dir, step)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JacobiSuite {
        trials,
        ..summarize_jacobi(deviations, step)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSuite {
    pub trials: usize,
    pub step: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    pub k1_sup: f64,
    pub k2_at_zero: f64,
    pub k3_at_zero: f64,
    pub tangential_sup: f64,
    pub endpoint_sup: f64,
    pub ev_k_residual: f64,
    /// Smallest `|K2(±1/2)|`, `|K3(±1/2)|` seen: the identities are
    /// specific to `t = 0`.
    pub min_off_center: f64,
    pub passed: bool,
}

/// K identities on random segments of `S^2` and `S^3` (alternating), with
/// speeds uniform in `[min_speed, max_speed]` and a random parallel field.
pub fn k_suite(
    min_speed: f64,
    max_speed: f64,
    trials: usize,
    seed: u64,
    step: f64,
) -> Result<KSuite> {
    if !(min_speed > 0.0 && min_speed <= max_speed) {
        return Err(Error::Precondition(format!(
            "speed range [{min_speed}, {max_speed}] is empty or not positive"
        )));
    }
    let reports = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let dim = 2 + t % 2;
            let speed = if min_speed == max_speed {
                min_speed
            } else {
                rng.gen_range(min_speed..=max_speed)
            };
            let seg = random_segment(dim, speed, &mut rng)?;
            let xi: Vec<f64> = loop {
                let xi: Vec<f64> = (0..dim - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
                if n > 0.1 {
                    break xi.iter().map(|c| c / n).collect();
                }
            };
            check_k_identities(&seg, &xi, step)
        })
        .collect::<Result<Vec<_>>>()?;
    let max =
        |f: fn(&crate::jacobi::KIdentityReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    let k1_sup = max(|r| r.k1_sup);
    let k2_at_zero = max(|r| r.k2_at_zero);
    let k3_at_zero = max(|r| r.k3_at_zero);
    let tangential_sup = max(|r| r.tangential_sup);
    let endpoint_sup = max(|r| r.endpoint_sup);
    let ev_k_residual = max(|r| r.ev_k_residual);
    let min_off_center = reports
        .iter()
        .map(|r| r.k2_off_center.min(r.k3_off_center))
        .fold(f64::INFINITY, f64::min);
    let passed = k1_sup <= K_TOL
        && k2_at_zero <= K_TOL
        && k3_at_zero <= K_TOL
        && tangential_sup <= K_ENDPOINT_TOL
        && endpoint_sup <= K_ENDPOINT_TOL
        && ev_k_residual <= EV_K_TOL;
    Ok(KSuite {
        trials,
        step,
        min_speed,
        max_speed,
        k1_sup,
        k2_at_zero,
        k3_at_zero,
        tangential_sup,
        endpoint_sup,
        ev_k_residual,
        min_off_center,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub speed: f64,
    pub seed: u64,
    pub jacobi: JacobiSuite,
    pub k: KSuite,
    pub contraction: OrderingSuite,
    pub expansion: OrderingSuite,
    pub passed: bool,
}

/// Every lemma suite at one segment speed: the Jacobi closed form against
/// its oracle (first-difference step [`FD_STEP_FIRST`]), the K identities
/// with second-difference step `k_step`, and both ordering cases.
pub fn lemma_report(
    speed: f64,
    k_step: f64,
    trials: usize,
    ordering_trials: usize,
    seed: u64,
) -> Result<LemmaReport> {
    if !(speed > 0.0) {
        return Err(Error::Domain {
            value: speed,
            domain: "segment speed (0, pi/2)",
        });
    }
    let jacobi = jacobi_suite_at_speed(speed, 2, trials, seed, FD_STEP_FIRST)?;
    let k = k_suite(speed, speed, trials, seed, k_step)?;
    let contraction = ordering_suite(MapKind::Contraction, ordering_trials, seed, ORDERING_TOL)?;
    let expansion = ordering_suite(MapKind::Expansion, ordering_trials, seed, ORDERING_TOL)?;
    let passed =
        jacobi.passed && k.passed && contraction.violations == 0 && expansion.violations == 0;
    Ok(LemmaReport {
        speed,
        seed,
        jacobi,
        k,
        contraction,
        expansion,
        passed,
    })
}

/// Default second-difference step.
pub const DEFAULT_K_STEP: f64 = FD_STEP_SECOND;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_segments_have_requested_speed() {
        let mut rng = trial_rng(3, 0);
        for &s in &[0.1, 0.7, 1.4] {
            let seg = random_segment(3, s, &mut rng).unwrap();
            assert!((seg.speed() - s).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_speed_is_an_error() {
        assert!(matches!(
            lemma_report(1.57, DEFAULT_K_STEP, 2, 10, 0),
            Err(Error::ConjugatePoint { .. })
        ));
    }

    #[test]
    fn small_suite_passes() {
        let r = lemma_report(0.7, DEFAULT_K_STEP, 4, 200, 1).unwrap();
        assert!(r.passed, "{r:#?}");
        assert!(r.k.min_off_center > 1e-3);
    }
}
