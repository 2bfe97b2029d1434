//! Scalar fields on the sphere with gradient access.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::SpherePoint;

pub trait ScalarField: Sync {
    fn value(&self, x: &SpherePoint) -> Result<f64>;

    /// Value and Riemannian gradient, as an ambient vector tangent at `x`.
    fn value_and_gradient(&self, x: &SpherePoint) -> Result<(f64, DVector<f64>)>;

    /// Points where the field is known exactly, e.g. grid nodes.
    fn nodes(&self) -> Vec<SpherePoint> {
        Vec::new()
    }
}

fn check_dim(x: &SpherePoint, dim: usize) -> Result<()> {
    if x.ambient_dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.ambient_dim(),
        });
    }
    Ok(())
}

/// `u(x) = a cos d(x, pole) + k = a ⟨x, pole⟩ + k`. Concave on the open
/// hemisphere about `pole` for `a > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineField {
    pub pole: SpherePoint,
    pub amplitude: f64,
    pub offset: f64,
}

impl CosineField {
    pub fn new(pole: SpherePoint, amplitude: f64, offset: f64) -> Self {
        Self {
            pole,
            amplitude,
            offset,
        }
    }
}

impl ScalarField for CosineField {
    fn value(&self, x: &SpherePoint) -> Result<f64> {
        check_dim(x, self.pole.ambient_dim())?;
        Ok(self.amplitude * x.dot(&self.pole) + self.offset)
    }

    fn value_and_gradient(&self, x: &SpherePoint) -> Result<(f64, DVector<f64>)> {
        let c = x.dot(&self.pole);
        let grad = (self.pole.coords() - x.coords() * c) * self.amplitude;
        Ok((self.value(x)?, grad))
    }
}

/// Signed distance `asin ⟨x, m⟩` to the great circle with pole `m`:
/// concave and linear along every geodesic through `m`, so the two-point
/// function vanishes on a whole family of pairs with `x ≠ y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreatCircleDistance {
    pub pole: SpherePoint,
}

impl ScalarField for GreatCircleDistance {
    fn value(&self, x: &SpherePoint) -> Result<f64> {
        check_dim(x, self.pole.ambient_dim())?;
        Ok(x.dot(&self.pole).clamp(-1.0, 1.0).asin())
    }

    fn value_and_gradient(&self, x: &SpherePoint) -> Result<(f64, DVector<f64>)> {
        let s = x.dot(&self.pole);
        let c = (1.0 - s * s).sqrt();
        if c < 1e-12 {
            return Err(Error::Domain {
                value: s,
                domain: "great-circle distance is smooth away from its poles",
            });
        }
        let grad = (self.pole.coords() - x.coords() * s) / c;
        Ok((self.value(x)?, grad))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField(pub f64);

impl ScalarField for ConstantField {
    fn value(&self, _x: &SpherePoint) -> Result<f64> {
        Ok(self.0)
    }

    fn value_and_gradient(&self, x: &SpherePoint) -> Result<(f64, DVector<f64>)> {
        Ok((self.0, DVector::zeros(x.ambient_dim())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{exp_map, TangentVector};

    fn fd_gradient_check(u: &dyn ScalarField, x: &SpherePoint) {
        let (_, g) = u.value_and_gradient(x).unwrap();
        assert!(g.dot(x.coords()).abs() < 1e-14);
        for e in crate::geometry::tangent_basis(x) {
            let h = 1e-6;
            let plus = exp_map(&TangentVector::new(x.clone(), &e * h).unwrap());
            let minus = exp_map(&TangentVector::new(x.clone(), &e * -h).unwrap());
            let fd = (u.value(&plus).unwrap() - u.value(&minus).unwrap()) / (2.0 * h);
            assert!((fd - g.dot(&e)).abs() < 1e-8, "{fd} vs {}", g.dot(&e));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let pole = SpherePoint::from_slice(&[0.0, 0.0, 1.0]).unwrap();
        let x = SpherePoint::from_slice(&[0.3, -0.4, 0.8]).unwrap();
        fd_gradient_check(&CosineField::new(pole.clone(), 1.5, -0.2), &x);
        let m = SpherePoint::from_slice(&[0.5, 0.0, 0.8]).unwrap();
        fd_gradient_check(&GreatCircleDistance { pole: m }, &x);
        fd_gradient_check(&ConstantField(2.0), &x);
    }
}
