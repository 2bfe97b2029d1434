//! Geodesic caps `{x ∈ S² : d(x, pole) <= R}` with `R < π/2`, in geodesic
//! polar coordinates about the pole.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::geometry::{distance, tangent_basis, SpherePoint};

/// Slack used when deciding whether a point lies in the closed cap.
pub const CAP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CapDomain {
    pole: SpherePoint,
    radius: f64,
    e1: DVector<f64>,
    e2: DVector<f64>,
}

/// Serialized form: radius plus optional pole (default north pole).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapSpec {
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pole: Option<[f64; 3]>,
}

impl CapDomain {
    pub fn new(pole: SpherePoint, radius: f64) -> Result<Self> {
        if pole.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: pole.ambient_dim(),
            });
        }
        if !(radius > 0.0 && radius < FRAC_PI_2) {
            return Err(Error::Domain {
                value: radius,
                domain: "cap radius (0, pi/2)",
            });
        }
        let basis = tangent_basis(&pole);
        Ok(Self {
            pole,
            radius,
            e1: basis[0].clone(),
            e2: basis[1].clone(),
        })
    }

    /// Cap about `(0, 0, 1)`; polar angle measured from the `x` axis.
    pub fn north(radius: f64) -> Result<Self> {
        Self::new(SpherePoint::from_slice(&[0.0, 0.0, 1.0])?, radius)
    }

    pub fn from_spec(spec: &CapSpec) -> Result<Self> {
        let pole = SpherePoint::from_slice(&spec.pole.unwrap_or([0.0, 0.0, 1.0]))?;
        Self::new(pole, spec.radius)
    }

    pub fn spec(&self) -> CapSpec {
        let c = self.pole.coords();
        let pole = [c[0], c[1], c[2]];
        CapSpec {
            radius: self.radius,
            pole: (pole != [0.0, 0.0, 1.0]).then_some(pole),
        }
    }

    pub fn pole(&self) -> &SpherePoint {
        &self.pole
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Geodesic polar coordinates `(r, θ)` with `θ ∈ [0, 2π)`.
    pub fn polar(&self, x: &SpherePoint) -> Result<(f64, f64)> {
        let r = distance(&self.pole, x)?;
        let a = x.coords().dot(&self.e1);
        let b = x.coords().dot(&self.e2);
        let mut theta = b.atan2(a);
        if theta < 0.0 {
            theta += 2.0 * PI;
        }
        if theta >= 2.0 * PI {
            theta = 0.0;
        }
        Ok((r, theta))
    }

    pub fn point_at(&self, r: f64, theta: f64) -> SpherePoint {
        let dir = &self.e1 * theta.cos() + &self.e2 * theta.sin();
        let coords = self.pole.coords() * r.cos() + dir * r.sin();
        SpherePoint::new(coords).expect("polar point lies on the sphere")
    }

    /// Unit vector `∂_r` at `(r, θ)`.
    pub fn radial_unit(&self, r: f64, theta: f64) -> DVector<f64> {
        let dir = &self.e1 * theta.cos() + &self.e2 * theta.sin();
        self.pole.coords() * -r.sin() + dir * r.cos()
    }

    /// Unit vector `∂_θ / sin r` at angle `θ`.
    pub fn angular_unit(&self, theta: f64) -> DVector<f64> {
        &self.e1 * -theta.sin() + &self.e2 * theta.cos()
    }

    /// `e1`, `e2`: orthonormal basis of the tangent plane at the pole.
    pub fn pole_basis(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.e1, &self.e2)
    }

    pub fn contains(&self, x: &SpherePoint) -> bool {
        distance(&self.pole, x)
            .map(|d| d <= self.radius * (1.0 + CAP_SLACK) + CAP_SLACK)
            .unwrap_or(false)
    }

    /// Area-uniform sample: `cos r` uniform on `[cos R, 1]`, `θ` uniform.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> SpherePoint {
        let c = rng.gen_range(self.radius.cos()..=1.0);
        let r = c.clamp(-1.0, 1.0).acos().min(self.radius);
        let theta = rng.gen_range(0.0..2.0 * PI);
        self.point_at(r, theta)
    }

    pub fn sample_boundary<R: Rng + ?Sized>(&self, rng: &mut R) -> SpherePoint {
        let theta = rng.gen_range(0.0..2.0 * PI);
        self.point_at(self.radius, theta)
    }
}
