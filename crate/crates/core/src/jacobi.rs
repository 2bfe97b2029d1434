//! Jacobi fields along sphere geodesics and their endpoint variations.
//!
//! The closed forms are written against a parallel frame `E_i` along the
//! segment: the tangential part of a Jacobi field is affine in `t`, each
//! normal part is a combination of `v(1 - t)` and `v(1 + t)` with
//! `v(t) = sin(|γ̇| t) / sin(2 |γ̇|)`.
//!
//! The finite-difference oracles differentiate the geodesic family
//! `Γ(x, y, t)` directly, moving the endpoints through the exponential maps
//! at `x` and `y` (normal coordinates), so they share no code with the
//! closed forms beyond the sphere primitives.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{exp_map, GeodesicSegment, ParallelFrame, SpherePoint, TangentVector};

/// Smallest admissible `sin(2 |γ̇|)`; closer to the conjugate limit the
/// boundary value problem is too ill-conditioned to be useful.
pub const CONJUGATE_SINE_MIN: f64 = 1e-2;

/// Default step for first-order endpoint differences.
pub const FD_STEP_FIRST: f64 = 1e-5;

/// Default step for second-order endpoint differences.
pub const FD_STEP_SECOND: f64 = 1e-3;

/// Solution of `v'' = -speed² v`, `v(0) = 0`, `v(2) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiScalar {
    speed: f64,
    sin_two_speed: f64,
}

impl JacobiScalar {
    pub fn new(speed: f64) -> Result<Self> {
        if !speed.is_finite() || speed < 0.0 {
            return Err(Error::Domain {
                value: speed,
                domain: "geodesic speed [0, pi/2)",
            });
        }
        let sine = (2.0 * speed).sin();
        if speed >= std::f64::consts::FRAC_PI_2
            || (speed > std::f64::consts::FRAC_PI_4 && sine < CONJUGATE_SINE_MIN)
        {
            return Err(Error::ConjugatePoint { speed, sine });
        }
        Ok(Self {
            speed,
            sin_two_speed: sine,
        })
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.speed == 0.0 {
            0.5 * t
        } else {
            (self.speed * t).sin() / self.sin_two_speed
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if self.speed == 0.0 {
            0.5
        } else {
            self.speed * (self.speed * t).cos() / self.sin_two_speed
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        -self.speed * self.speed * self.value(t)
    }
}

/// `v(t)` for `t ∈ [0, 2]`.
pub fn jacobi_scalar_v(speed: f64, t: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&t) {
        return Err(Error::Domain {
            value: t,
            domain: "jacobi scalar interval [0, 2]",
        });
    }
    Ok(JacobiScalar::new(speed)?.value(t))
}

/// Rm(a, b)c = <b, c> a - <a, c> b, the curvature of the unit sphere.
pub fn riemann_curvature(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
    a * b.dot(c) - b * a.dot(c)
}

/// Jacobi field along a segment with prescribed values at `t = -1` and `t = 1`.
#[derive(Debug, Clone)]
pub struct JacobiField {
    frame: ParallelFrame,
    scalar: JacobiScalar,
    left: Vec<f64>,
    right: Vec<f64>,
}

/// Solves the Jacobi boundary value problem in closed form.
pub fn jacobi_bvp(
    seg: &GeodesicSegment,
    left: &TangentVector,
    right: &TangentVector,
) -> Result<JacobiField> {
    if seg.is_degenerate() {
        return Err(Error::DegenerateSegment);
    }
    let scalar = JacobiScalar::new(seg.speed())?;
    check_based_at(left, seg.start(), "left")?;
    check_based_at(right, seg.end(), "right")?;
    let frame = ParallelFrame::new(seg)?;
    let left = frame.coefficients(left, -1.0)?;
    let right = frame.coefficients(right, 1.0)?;
    Ok(JacobiField {
        frame,
        scalar,
        left,
        right,
    })
}

fn check_based_at(v: &TangentVector, p: &SpherePoint, which: &str) -> Result<()> {
    if v.base().ambient_dim() != p.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: p.ambient_dim(),
            got: v.base().ambient_dim(),
        });
    }
    let offset = (v.base().coords() - p.coords()).norm();
    if offset > 1e-10 {
        return Err(Error::Precondition(format!(
            "{which} boundary vector is not based at the segment endpoint (offset {offset:e})"
        )));
    }
    Ok(())
}

impl JacobiField {
    pub fn segment(&self) -> &GeodesicSegment {
        self.frame.segment()
    }

    pub fn frame(&self) -> &ParallelFrame {
        &self.frame
    }

    /// Frame coefficients of `J(t)`.
    pub fn coefficients(&self, t: f64) -> Vec<f64> {
        let v = &self.scalar;
        self.left
            .iter()
            .zip(&self.right)
            .enumerate()
            .map(|(i, (a, b))| {
                if i == 0 {
                    0.5 * (1.0 - t) * a + 0.5 * (1.0 + t) * b
                } else {
                    a * v.value(1.0 - t) + b * v.value(1.0 + t)
                }
            })
            .collect()
    }

    fn derivative_coefficients(&self, t: f64) -> Vec<f64> {
        let v = &self.scalar;
        self.left
            .iter()
            .zip(&self.right)
            .enumerate()
            .map(|(i, (a, b))| {
                if i == 0 {
                    0.5 * (b - a)
                } else {
                    -a * v.derivative(1.0 - t) + b * v.derivative(1.0 + t)
                }
            })
            .collect()
    }

    fn second_derivative_coefficients(&self, t: f64) -> Vec<f64> {
        let v = &self.scalar;
        self.left
            .iter()
            .zip(&self.right)
            .enumerate()
            .map(|(i, (a, b))| {
                if i == 0 {
                    0.0
                } else {
                    a * v.second_derivative(1.0 - t) + b * v.second_derivative(1.0 + t)
                }
            })
            .collect()
    }

    pub fn at(&self, t: f64) -> Result<TangentVector> {
        let base = self.segment().point(t)?;
        TangentVector::new(base, self.frame.combine(&self.coefficients(t), t)?)
    }

    /// `D_t J(t)`; the frame is parallel so only the coefficients move.
    pub fn covariant_derivative(&self, t: f64) -> Result<TangentVector> {
        let base = self.segment().point(t)?;
        TangentVector::new(
            base,
            self.frame.combine(&self.derivative_coefficients(t), t)?,
        )
    }

    pub fn second_covariant_derivative(&self, t: f64) -> Result<TangentVector> {
        let base = self.segment().point(t)?;
        TangentVector::new(
            base,
            self.frame
                .combine(&self.second_derivative_coefficients(t), t)?,
        )
    }

    /// Residual of `D_t² J + Rm(J, γ̇)γ̇` evaluated with the analytic
    /// covariant derivatives.
    pub fn analytic_residual(&self, t: f64) -> Result<f64> {
        let j = self.at(t)?;
        let vel = self.segment().velocity(t)?;
        let acc = self.second_covariant_derivative(t)?;
        let r = acc.vec() + riemann_curvature(j.vec(), vel.vec(), vel.vec());
        Ok(r.norm())
    }
}

/// A simultaneous variation of both endpoints: a tangent vector at `x` and
/// one at `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDirection {
    pub at_x: DVector<f64>,
    pub at_y: DVector<f64>,
}

impl PairDirection {
    pub fn at_x(v: &TangentVector) -> Self {
        Self {
            at_x: v.vec().clone(),
            at_y: DVector::zeros(v.vec().len()),
        }
    }

    pub fn at_y(v: &TangentVector) -> Self {
        Self {
            at_x: DVector::zeros(v.vec().len()),
            at_y: v.vec().clone(),
        }
    }

    /// Direction with frame coefficients `cx` at `t = -1` and `cy` at `t = 1`.
    pub fn from_frame(frame: &ParallelFrame, cx: &[f64], cy: &[f64]) -> Result<Self> {
        Ok(Self {
            at_x: frame.combine(cx, -1.0)?,
            at_y: frame.combine(cy, 1.0)?,
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            at_x: &self.at_x * factor,
            at_y: &self.at_y * factor,
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self {
            at_x: &self.at_x + &other.at_x,
            at_y: &self.at_y + &other.at_y,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.at_x.iter().chain(self.at_y.iter()).all(|c| *c == 0.0)
    }

    /// Closed-form Jacobi field with this direction as boundary data.
    pub fn jacobi_field(&self, seg: &GeodesicSegment) -> Result<JacobiField> {
        let left = TangentVector::new(seg.start().clone(), self.at_x.clone())?;
        let right = TangentVector::new(seg.end().clone(), self.at_y.clone())?;
        jacobi_bvp(seg, &left, &right)
    }
}

/// Ambient position, velocity and acceleration of the perturbed geodesic.
struct FamilySample {
    point: DVector<f64>,
    velocity: DVector<f64>,
    acceleration: DVector<f64>,
}

/// `Γ(exp_x(a), exp_y(b), t)` and its analytic `t`-derivatives.
fn family_sample(
    x: &SpherePoint,
    y: &SpherePoint,
    dx: &DVector<f64>,
    dy: &DVector<f64>,
    t: f64,
) -> Result<FamilySample> {
    let xs = exp_map(&TangentVector::new(x.clone(), dx.clone())?);
    let ys = exp_map(&TangentVector::new(y.clone(), dy.clone())?);
    let seg = GeodesicSegment::new(&xs, &ys)?;
    let point = seg.point(t)?.coords().clone();
    let velocity = seg.velocity(t)?.into_vec();
    // ambient geodesic equation: γ'' = -|γ'|² γ
    let acceleration = &point * -(seg.speed() * seg.speed());
    Ok(FamilySample {
        point,
        velocity,
        acceleration,
    })
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0 && step <= 1e-2) {
        return Err(Error::Domain {
            value: step,
            domain: "finite-difference step (0, 1e-2]",
        });
    }
    Ok(())
}

/// Central-difference Jacobi field `∂_s Γ(exp_x(s d_x), exp_y(s d_y), t)`,
/// projected to `T_{γ(t)}` and sampled at `ts`.
pub fn fd_jacobi_oracle(
    x: &SpherePoint,
    y: &SpherePoint,
    direction: &PairDirection,
    step: f64,
    ts: &[f64],
) -> Result<Vec<TangentVector>> {
    check_step(step)?;
    let seg = GeodesicSegment::new(x, y)?;
    let plus = direction.scaled(step);
    let minus = direction.scaled(-step);
    ts.iter()
        .map(|&t| {
            let base = seg.point(t)?;
            if direction.is_zero() {
                return Ok(TangentVector::zero(base));
            }
            let fp = family_sample(x, y, &plus.at_x, &plus.at_y, t)?;
            let fm = family_sample(x, y, &minus.at_x, &minus.at_y, t)?;
            TangentVector::new(base, (fp.point - fm.point) / (2.0 * step))
        })
        .collect()
}

/// Second mixed endpoint derivative of the family together with its first
/// two `t`-derivatives, all ambient (before projection).
struct SecondVariation {
    value: DVector<f64>,
    dt: DVector<f64>,
    dtt: DVector<f64>,
}

fn second_variation(
    x: &SpherePoint,
    y: &SpherePoint,
    d1: &PairDirection,
    d2: &PairDirection,
    step: f64,
    t: f64,
) -> Result<SecondVariation> {
    let sample = |d: &PairDirection| family_sample(x, y, &d.at_x, &d.at_y, t);
    if d1 == d2 {
        let fp = sample(&d1.scaled(step))?;
        let f0 = sample(&d1.scaled(0.0))?;
        let fm = sample(&d1.scaled(-step))?;
        let h2 = step * step;
        let combine = |a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>| (a - b * 2.0 + c) / h2;
        return Ok(SecondVariation {
            value: combine(&fp.point, &f0.point, &fm.point),
            dt: combine(&fp.velocity, &f0.velocity, &fm.velocity),
            dtt: combine(&fp.acceleration, &f0.acceleration, &fm.acceleration),
        });
    }
    let a = d1.scaled(step);
    let b = d2.scaled(step);
    let fpp = sample(&a.plus(&b))?;
    let fpm = sample(&a.plus(&b.scaled(-1.0)))?;
    let fmp = sample(&a.scaled(-1.0).plus(&b))?;
    let fmm = sample(&a.scaled(-1.0).plus(&b.scaled(-1.0)))?;
    let h2 = 4.0 * step * step;
    let combine = |pp: &DVector<f64>, pm: &DVector<f64>, mp: &DVector<f64>, mm: &DVector<f64>| {
        (pp - pm - mp + mm) / h2
    };
    Ok(SecondVariation {
        value: combine(&fpp.point, &fpm.point, &fmp.point, &fmm.point),
        dt: combine(&fpp.velocity, &fpm.velocity, &fmp.velocity, &fmm.velocity),
        dtt: combine(
            &fpp.acceleration,
            &fpm.acceleration,
            &fmp.acceleration,
            &fmm.acceleration,
        ),
    })
}

/// Fourth-order pure second derivative along `d` with the five-point
/// stencil `(-f(2h) + 16 f(h) - 30 f(0) + 16 f(-h) - f(-2h)) / 12h²`.
fn pure_second_variation_o4(
    x: &SpherePoint,
    y: &SpherePoint,
    d: &PairDirection,
    step: f64,
    t: f64,
) -> Result<SecondVariation> {
    let weights = [
        (-2.0, -1.0),
        (-1.0, 16.0),
        (0.0, -30.0),
        (1.0, 16.0),
        (2.0, -1.0),
    ];
    let dim = x.ambient_dim();
    let mut out = SecondVariation {
        value: DVector::zeros(dim),
        dt: DVector::zeros(dim),
        dtt: DVector::zeros(dim),
    };
    let denom = 12.0 * step * step;
    for (k, w) in weights {
        let dk = d.scaled(k * step);
        let f = family_sample(x, y, &dk.at_x, &dk.at_y, t)?;
        out.value += f.point * (w / denom);
        out.dt += f.velocity * (w / denom);
        out.dtt += f.acceleration * (w / denom);
    }
    Ok(out)
}

/// Fourth-order second variation; mixed derivatives by polarization,
/// `∂_a ∂_b = (∂²_{a+b} - ∂²_{a-b}) / 4`.
fn second_variation_o4(
    x: &SpherePoint,
    y: &SpherePoint,
    d1: &PairDirection,
    d2: &PairDirection,
    step: f64,
    t: f64,
) -> Result<SecondVariation> {
    if d1 == d2 {
        return pure_second_variation_o4(x, y, d1, step, t);
    }
    let sum = pure_second_variation_o4(x, y, &d1.plus(d2), step, t)?;
    let diff = pure_second_variation_o4(x, y, &d1.plus(&d2.scaled(-1.0)), step, t)?;
    Ok(SecondVariation {
        value: (sum.value - diff.value) * 0.25,
        dt: (sum.dt - diff.dt) * 0.25,
        dtt: (sum.dtt - diff.dtt) * 0.25,
    })
}

/// Second endpoint variation `K(d1, d2)(t) = D_{d2} ∂_{d1} Γ` by central
/// differences in normal coordinates at both endpoints, projected to the
/// tangent space at `γ(t)`.
pub fn fd_k_oracle(
    x: &SpherePoint,
    y: &SpherePoint,
    d1: &PairDirection,
    d2: &PairDirection,
    step: f64,
    ts: &[f64],
) -> Result<Vec<TangentVector>> {
    check_step(step)?;
    let seg = GeodesicSegment::new(x, y)?;
    ts.iter()
        .map(|&t| {
            let base = seg.point(t)?;
            let sv = second_variation(x, y, d1, d2, step, t)?;
            TangentVector::new(base, sv.value)
        })
        .collect()
}

/// Sup-norm over `ts` of the differentiated Jacobi equation
/// `D_t²K + Rm(K, γ̇)γ̇ + 2 Rm(J_1, γ̇) D_t J_2 + 2 Rm(J_2, γ̇) D_t J_1`
/// with `K = K(d1, d2)` from fourth-order finite differences and `J_i` in
/// closed form.
pub fn ev_k_residual(
    x: &SpherePoint,
    y: &SpherePoint,
    d1: &PairDirection,
    d2: &PairDirection,
    step: f64,
    ts: &[f64],
) -> Result<f64> {
    check_step(step)?;
    let seg = GeodesicSegment::new(x, y)?;
    let j1 = d1.jacobi_field(&seg)?;
    let j2 = d2.jacobi_field(&seg)?;
    let mut worst = 0.0f64;
    for &t in ts {
        let gamma = seg.point(t)?.coords().clone();
        let vel = seg.velocity(t)?.into_vec();
        let sv = second_variation_o4(x, y, d1, d2, step, t)?;
        let project = |w: &DVector<f64>| w - &gamma * w.dot(&gamma);
        let k = project(&sv.value);
        // D_t² of K = P M with M the ambient second variation
        let dtt_k = project(&sv.dtt) - &vel * vel.dot(&sv.value) - &vel * (2.0 * gamma.dot(&sv.dt));
        let j1t = j1.at(t)?.into_vec();
        let j2t = j2.at(t)?.into_vec();
        let dj1 = j1.covariant_derivative(t)?.into_vec();
        let dj2 = j2.covariant_derivative(t)?.into_vec();
        let residual = dtt_k
            + riemann_curvature(&k, &vel, &vel)
            + riemann_curvature(&j1t, &vel, &dj2) * 2.0
            + riemann_curvature(&j2t, &vel, &dj1) * 2.0;
        worst = worst.max(residual.norm());
    }
    Ok(worst)
}

/// Which combination of second variations a [`KQuantity`] samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KLabel {
    /// `(∂_{x^0} + ∂_{y^0})(∂_{x^α} + ∂_{y^α})`
    K1,
    /// `(∂_x + ∂_y)²` in a parallel normal direction
    K2,
    /// `(∂_x - ∂_y)²` in a parallel normal direction
    K3,
    /// `K_{x^0 x^0}`, `K_{y^0 y^0}` or `K_{x^0 y^0}`
    Tangential,
}

#[derive(Debug, Clone)]
pub struct KQuantity {
    pub label: KLabel,
    pub ts: Vec<f64>,
    pub values: Vec<TangentVector>,
}

impl KQuantity {
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .map(TangentVector::norm)
            .fold(0.0, f64::max)
    }

    /// Norm at the sample closest to `t`.
    pub fn norm_near(&self, t: f64) -> f64 {
        let (idx, _) = self
            .ts
            .iter()
            .enumerate()
            .map(|(i, s)| (i, (s - t).abs()))
            .fold(
                (0, f64::INFINITY),
                |acc, cur| if cur.1 < acc.1 { cur } else { acc },
            );
        self.values[idx].norm()
    }
}

/// The four direction pairs describing `K1` (index `α`), `K2` and `K3`.
pub struct KDirections {
    pub tangential_x: PairDirection,
    pub tangential_y: PairDirection,
    pub tangential_sum: PairDirection,
    pub normal_sum: Vec<PairDirection>,
    pub xi_sum: PairDirection,
    pub xi_diff: PairDirection,
}

impl KDirections {
    /// `xi` holds the `n - 1` normal frame coefficients of the parallel field ξ.
    pub fn new(frame: &ParallelFrame, xi: &[f64]) -> Result<Self> {
        let n = frame.len();
        if xi.len() != n - 1 {
            return Err(Error::DimensionMismatch {
                expected: n - 1,
                got: xi.len(),
            });
        }
        let unit = |i: usize| {
            let mut c = vec![0.0; n];
            c[i] = 1.0;
            c
        };
        let zero = vec![0.0; n];
        let mut xi_full = vec![0.0; n];
        xi_full[1..].copy_from_slice(xi);
        let neg_xi: Vec<f64> = xi_full.iter().map(|c| -c).collect();
        Ok(Self {
            tangential_x: PairDirection::from_frame(frame, &unit(0), &zero)?,
            tangential_y: PairDirection::from_frame(frame, &zero, &unit(0))?,
            tangential_sum: PairDirection::from_frame(frame, &unit(0), &unit(0))?,
            normal_sum: (1..n)
                .map(|a| PairDirection::from_frame(frame, &unit(a), &unit(a)))
                .collect::<Result<_>>()?,
            xi_sum: PairDirection::from_frame(frame, &xi_full, &xi_full)?,
            xi_diff: PairDirection::from_frame(frame, &xi_full, &neg_xi)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KIdentityReport {
    pub speed: f64,
    pub step: f64,
    /// sup over `α` and `t ∈ [-1, 1]` of `|K1|`
    pub k1_sup: f64,
    pub k2_at_zero: f64,
    pub k3_at_zero: f64,
    /// sup over `t` of `|K_{x⁰x⁰}|`, `|K_{y⁰y⁰}|`, `|K_{x⁰y⁰}|`
    pub tangential_sup: f64,
    /// largest norm of any sampled K at `t = ±1`
    pub endpoint_sup: f64,
    /// sup of the differentiated Jacobi equation residual on interior `t`
    pub ev_k_residual: f64,
    /// `|K2(±1/2)|`, `|K3(±1/2)|`, max over the sign
    pub k2_off_center: f64,
    pub k3_off_center: f64,
}

/// Sample grid used for the K identities: 21 points on `[-1, 1]`.
pub fn k_grid() -> Vec<f64> {
    (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect()
}

/// Evaluates the vanishing statements for the second endpoint variations
/// along `seg` with parallel field coefficients `xi`.
pub fn check_k_identities(seg: &GeodesicSegment, xi: &[f64], step: f64) -> Result<KIdentityReport> {
    check_step(step)?;
    JacobiScalar::new(seg.speed())?;
    let frame = ParallelFrame::new(seg)?;
    let dirs = KDirections::new(&frame, xi)?;
    let (x, y) = (seg.start(), seg.end());
    let ts = k_grid();
    let interior: Vec<f64> = ts[1..ts.len() - 1].to_vec();
    let endpoints = [-1.0, 1.0];

    let sample = |label, d1: &PairDirection, d2: &PairDirection, ts: &[f64]| -> Result<KQuantity> {
        Ok(KQuantity {
            label,
            ts: ts.to_vec(),
            values: fd_k_oracle(x, y, d1, d2, step, ts)?,
        })
    };

    let mut k1_sup = 0.0f64;
    let mut endpoint_sup = 0.0f64;
    let mut ev_k = 0.0f64;
    for normal in &dirs.normal_sum {
        let k1 = sample(KLabel::K1, &dirs.tangential_sum, normal, &ts)?;
        k1_sup = k1_sup.max(k1.sup_norm());
        endpoint_sup = endpoint_sup
            .max(k1.values[0].norm())
            .max(k1.values[20].norm());
        ev_k = ev_k.max(ev_k_residual(
            x,
            y,
            &dirs.tangential_sum,
            normal,
            step,
            &interior,
        )?);
    }

    let mut tangential_sup = 0.0f64;
    for (d1, d2) in [
        (&dirs.tangential_x, &dirs.tangential_x),
        (&dirs.tangential_y, &dirs.tangential_y),
        (&dirs.tangential_x, &dirs.tangential_y),
    ] {
        let k = sample(KLabel::Tangential, d1, d2, &ts)?;
        tangential_sup = tangential_sup.max(k.sup_norm());
        endpoint_sup = endpoint_sup
            .max(k.values[0].norm())
            .max(k.values[20].norm());
    }

    let mid_points = [-0.5, 0.0, 0.5];
    let k2 = sample(KLabel::K2, &dirs.xi_sum, &dirs.xi_sum, &mid_points)?;
    let k3 = sample(KLabel::K3, &dirs.xi_diff, &dirs.xi_diff, &mid_points)?;
    for d in [&dirs.xi_sum, &dirs.xi_diff] {
        let k = sample(KLabel::K2, d, d, &endpoints)?;
        endpoint_sup = endpoint_sup.max(k.sup_norm());
        ev_k = ev_k.max(ev_k_residual(x, y, d, d, step, &interior)?);
    }
    // mixed K_{x^α y^β} for a generic pair of normal directions
    if let (Some(a), Some(b)) = (dirs.normal_sum.first(), dirs.normal_sum.last()) {
        let ax = PairDirection {
            at_x: a.at_x.clone(),
            at_y: a.at_y.clone() * 0.0,
        };
        let by = PairDirection {
            at_x: b.at_x.clone() * 0.0,
            at_y: b.at_y.clone(),
        };
        ev_k = ev_k.max(ev_k_residual(x, y, &ax, &by, step, &interior)?);
        let k = sample(KLabel::Tangential, &ax, &by, &endpoints)?;
        endpoint_sup = endpoint_sup.max(k.sup_norm());
    }

    Ok(KIdentityReport {
        speed: seg.speed(),
        step,
        k1_sup,
        k2_at_zero: k2.values[1].norm(),
        k3_at_zero: k3.values[1].norm(),
        tangential_sup,
        endpoint_sup,
        ev_k_residual: ev_k,
        k2_off_center: k2.values[0].norm().max(k2.values[2].norm()),
        k3_off_center: k3.values[0].norm().max(k3.values[2].norm()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn p(c: &[f64]) -> SpherePoint {
        SpherePoint::from_slice(c).unwrap()
    }

    /// Shooting solve of v'' = -s² v, v(0) = 0, v(2) = 1 with RK4; the
    /// equation is linear so one shot with v'(0) = 1 rescales exactly.
    fn shoot_v(speed: f64, t_eval: f64) -> f64 {
        let integrate = |t_end: f64| {
            let steps = 20_000;
            let h = t_end / steps as f64;
            let (mut v, mut w) = (0.0f64, 1.0f64);
            let f = |v: f64, w: f64| (w, -speed * speed * v);
            for _ in 0..steps {
                let k1 = f(v, w);
                let k2 = f(v + 0.5 * h * k1.0, w + 0.5 * h * k1.1);
                let k3 = f(v + 0.5 * h * k2.0, w + 0.5 * h * k2.1);
                let k4 = f(v + h * k3.0, w + h * k3.1);
                v += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
                w += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            }
            v
        };
        integrate(t_eval) / integrate(2.0)
    }

    #[test]
    fn scalar_v_examples() {
        for &t in &[0.0, 0.3, 1.0, 2.0] {
            assert_abs_diff_eq!(jacobi_scalar_v(0.0, t).unwrap(), 0.5 * t, epsilon = 1e-15);
        }
        for &s in &[0.0, 0.2, 0.9, 1.4] {
            assert_abs_diff_eq!(jacobi_scalar_v(s, 2.0).unwrap(), 1.0, epsilon = 1e-14);
            assert_eq!(jacobi_scalar_v(s, 0.0).unwrap(), 0.0);
        }
        let v1 = jacobi_scalar_v(FRAC_PI_4, 1.0).unwrap();
        assert_abs_diff_eq!(v1, FRAC_1_SQRT_2, epsilon = 1e-14);
        assert_abs_diff_eq!(shoot_v(FRAC_PI_4, 1.0), FRAC_1_SQRT_2, epsilon = 1e-10);
        assert_abs_diff_eq!(v1, shoot_v(FRAC_PI_4, 1.0), epsilon = 1e-10);
    }

    #[test]
    fn scalar_v_matches_shooting_and_cos_identity() {
        for &s in &[0.05, 0.4, 1.0, 1.3] {
            let v = JacobiScalar::new(s).unwrap();
            for &t in &[0.25, 1.0, 1.7] {
                assert_abs_diff_eq!(v.value(t), shoot_v(s, t), epsilon = 1e-10);
            }
            assert_abs_diff_eq!(v.value(1.0), 1.0 / (2.0 * s.cos()), epsilon = 1e-14);
            assert!(v.value(1.0) >= 0.5);
            // analytic ODE residual
            for &t in &[0.0, 0.6, 1.9] {
                let h = 1e-4;
                let fd = (v.value(t + h) - 2.0 * v.value(t) + v.value(t - h)) / (h * h);
                assert_abs_diff_eq!(fd, v.second_derivative(t), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn scalar_v_errors() {
        assert!(matches!(
            JacobiScalar::new(FRAC_PI_2),
            Err(Error::ConjugatePoint { .. })
        ));
        assert!(matches!(
            JacobiScalar::new(1.57),
            Err(Error::ConjugatePoint { .. })
        ));
        assert!(matches!(JacobiScalar::new(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(
            jacobi_scalar_v(0.5, 2.5),
            Err(Error::Domain { .. })
        ));
    }

    fn segment() -> GeodesicSegment {
        GeodesicSegment::new(&p(&[1.0, 0.2, 0.1]), &p(&[0.1, 0.9, 0.5])).unwrap()
    }

    #[test]
    fn tangential_bvp_is_affine() {
        let seg = segment();
        let frame = ParallelFrame::new(&seg).unwrap();
        let left = frame.vector(0, -1.0).unwrap();
        let right = TangentVector::zero(seg.end().clone());
        let j = jacobi_bvp(&seg, &left, &right).unwrap();
        for &t in &[-1.0, -0.3, 0.0, 0.5, 1.0] {
            let expected = frame.vector(0, t).unwrap().vec() * (0.5 * (1.0 - t));
            assert!((j.at(t).unwrap().vec() - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let seg = segment();
        let j = jacobi_bvp(
            &seg,
            &TangentVector::zero(seg.start().clone()),
            &TangentVector::zero(seg.end().clone()),
        )
        .unwrap();
        for &t in &[-1.0, 0.0, 0.7] {
            assert_eq!(j.at(t).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn normal_bvp_midpoint_value() {
        let seg = segment();
        let frame = ParallelFrame::new(&seg).unwrap();
        let left = frame.vector(1, -1.0).unwrap();
        let j = jacobi_bvp(&seg, &left, &TangentVector::zero(seg.end().clone())).unwrap();
        let expected = 1.0 / (2.0 * seg.speed().cos());
        let mid = j.at(0.0).unwrap();
        assert!((mid.vec() - frame.vector(1, 0.0).unwrap().vec() * expected).norm() < 1e-14);

        let fd = fd_jacobi_oracle(
            seg.start(),
            seg.end(),
            &PairDirection::at_x(&left),
            FD_STEP_FIRST,
            &[0.0],
        )
        .unwrap();
        assert!((fd[0].vec() - mid.vec()).norm() < 1e-6);
    }

    #[test]
    fn boundary_values_exact() {
        let seg = segment();
        let left = TangentVector::new(seg.start().clone(), DVector::from_vec(vec![0.3, -1.0, 2.0]))
            .unwrap();
        let right =
            TangentVector::new(seg.end().clone(), DVector::from_vec(vec![1.0, 0.5, -0.4])).unwrap();
        let j = jacobi_bvp(&seg, &left, &right).unwrap();
        assert!((j.at(-1.0).unwrap().vec() - left.vec()).norm() < 1e-14);
        assert!((j.at(1.0).unwrap().vec() - right.vec()).norm() < 1e-14);
        for &t in &[-0.8, 0.0, 0.4] {
            assert!(j.analytic_residual(t).unwrap() < 1e-13);
        }
    }

    #[test]
    fn jacobi_equation_residual_by_finite_differences() {
        let seg = segment();
        let left = TangentVector::new(seg.start().clone(), DVector::from_vec(vec![0.3, -1.0, 2.0]))
            .unwrap();
        let right =
            TangentVector::new(seg.end().clone(), DVector::from_vec(vec![1.0, 0.5, -0.4])).unwrap();
        let j = jacobi_bvp(&seg, &left, &right).unwrap();
        let h = 1e-3;
        for &t in &[-0.6, 0.0, 0.6] {
            let jm = j.at(t - h).unwrap().into_vec();
            let j0 = j.at(t).unwrap();
            let jp = j.at(t + h).unwrap().into_vec();
            let second = (jp - j0.vec() * 2.0 + jm) / (h * h);
            let gamma = seg.point(t).unwrap();
            let vel = seg.velocity(t).unwrap().into_vec();
            // D_t² J = P J'' + <J, γ̇> γ̇
            let proj = &second - gamma.coords() * second.dot(gamma.coords());
            let dtt = proj + &vel * vel.dot(j0.vec());
            let residual = dtt + riemann_curvature(j0.vec(), &vel, &vel);
            assert!(residual.norm() < 1e-5, "residual {}", residual.norm());
        }
    }

    #[test]
    fn fd_oracle_zero_and_tangential() {
        let seg = segment();
        let frame = ParallelFrame::new(&seg).unwrap();
        let zero = PairDirection {
            at_x: DVector::zeros(3),
            at_y: DVector::zeros(3),
        };
        let ts = [-1.0, 0.0, 1.0];
        for v in fd_jacobi_oracle(seg.start(), seg.end(), &zero, FD_STEP_FIRST, &ts).unwrap() {
            assert_eq!(v.norm(), 0.0);
        }
        let e0 = frame.vector(0, -1.0).unwrap();
        let fd = fd_jacobi_oracle(
            seg.start(),
            seg.end(),
            &PairDirection::at_x(&e0),
            FD_STEP_FIRST,
            &ts,
        )
        .unwrap();
        for (v, &t) in fd.iter().zip(&ts) {
            let expected = frame.vector(0, t).unwrap().vec() * (0.5 * (1.0 - t));
            assert!((v.vec() - expected).norm() < 1e-8);
        }
        assert!(fd_jacobi_oracle(seg.start(), seg.end(), &zero, 0.1, &ts).is_err());
    }

    #[test]
    fn fd_k_oracle_examples() {
        let seg = GeodesicSegment::new(&p(&[1.0, 0.0, 0.2]), &p(&[0.3, 1.0, -0.4])).unwrap();
        let frame = ParallelFrame::new(&seg).unwrap();
        let dirs = KDirections::new(&frame, &[1.0]).unwrap();
        let ts = k_grid();
        let k00 = fd_k_oracle(
            seg.start(),
            seg.end(),
            &dirs.tangential_x,
            &dirs.tangential_x,
            FD_STEP_SECOND,
            &ts,
        )
        .unwrap();
        assert!(k00.iter().all(|k| k.norm() <= 1e-5));
        let a = &dirs.normal_sum[0];
        let ax = PairDirection {
            at_x: a.at_x.clone(),
            at_y: DVector::zeros(3),
        };
        let k = fd_k_oracle(
            seg.start(),
            seg.end(),
            &ax,
            &ax,
            FD_STEP_SECOND,
            &[-1.0, 1.0],
        )
        .unwrap();
        assert!(k.iter().all(|k| k.norm() <= 1e-5));
        let ev =
            ev_k_residual(seg.start(), seg.end(), &ax, &ax, FD_STEP_SECOND, &ts[1..20]).unwrap();
        assert!(ev <= 1e-4, "ev-k residual {ev}");
    }

    #[test]
    fn k_identities_on_s2_and_s3() {
        let seg = GeodesicSegment::new(&p(&[1.0, 0.0, 0.2]), &p(&[0.3, 1.0, -0.4])).unwrap();
        let r = check_k_identities(&seg, &[0.8], FD_STEP_SECOND).unwrap();
        assert!(r.k1_sup <= 1e-4, "{r:?}");
        assert!(r.k2_at_zero <= 1e-4 && r.k3_at_zero <= 1e-4, "{r:?}");
        assert!(r.tangential_sup <= 1e-5 && r.endpoint_sup <= 1e-5, "{r:?}");
        assert!(r.ev_k_residual <= 1e-4, "{r:?}");
        assert!(r.k2_off_center > 1e-3 && r.k3_off_center > 1e-3, "{r:?}");

        let seg =
            GeodesicSegment::new(&p(&[1.0, 0.0, 0.2, 0.1]), &p(&[0.1, 1.0, -0.4, 0.6])).unwrap();
        let r = check_k_identities(&seg, &[0.6, -0.7], FD_STEP_SECOND).unwrap();
        assert!(
            r.k1_sup <= 1e-4 && r.k2_at_zero <= 1e-4 && r.k3_at_zero <= 1e-4,
            "{r:?}"
        );
        assert!(r.ev_k_residual <= 1e-4, "{r:?}");
    }

    #[test]
    fn k_identities_flat_limit() {
        let x = p(&[0.0, 0.0, 1.0]);
        let y = exp_map(
            &TangentVector::new(x.clone(), DVector::from_vec(vec![2e-9, 0.0, 0.0])).unwrap(),
        );
        let seg = GeodesicSegment::new(&x, &y).unwrap();
        assert!(seg.speed() > 0.0 && seg.speed() < 1e-8);
        let r = check_k_identities(&seg, &[1.0], FD_STEP_SECOND).unwrap();
        assert!(
            r.k1_sup <= 1e-8 && r.k2_at_zero <= 1e-8 && r.k3_at_zero <= 1e-8,
            "{r:?}"
        );
    }
}
