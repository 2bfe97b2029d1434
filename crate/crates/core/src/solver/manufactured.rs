//! Problems with known solutions on the cap of radius `R`.
//!
//! `u* = cos d - cos R` vanishes on the boundary and has
//! `-∇²u* = cos d · Id` on `S²`, so `-Δu* = 2 cos d` and
//! `tr exp(-∇²u*) = 2 exp(cos d)`.

use crate::cap::CapDomain;
use crate::error::Result;
use crate::field::CosineField;
use crate::operators::{Cone, Forcing, IsotropicOperator, Phi, Psi, RhsSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub operator: IsotropicOperator,
    pub rhs: RhsSpec,
    pub cap: CapDomain,
}

impl ManufacturedCase {
    pub fn exact(&self, d: f64) -> f64 {
        d.cos() - self.cap.radius().cos()
    }

    pub fn exact_field(&self) -> CosineField {
        CosineField::new(self.cap.pole().clone(), 1.0, -self.cap.radius().cos())
    }
}

/// `-Δu = 3 cos d - cos R - u`.
pub fn manufactured_case(radius: f64) -> Result<ManufacturedCase> {
    let cap = CapDomain::north(radius)?;
    Ok(ManufacturedCase {
        operator: IsotropicOperator::laplacian(),
        rhs: RhsSpec {
            c: Forcing::CosDist {
                a: 3.0,
                k: -radius.cos(),
            },
            lambda: 1.0,
            mu: 0.0,
        },
        cap,
    })
}

/// `tr exp(-∇²u) = 2 exp(cos d) + cos d - cos R - u`.
pub fn radial_exp_case(radius: f64) -> Result<ManufacturedCase> {
    let cap = CapDomain::north(radius)?;
    Ok(ManufacturedCase {
        operator: IsotropicOperator::new(Psi::Exp, Phi::Zero, Cone::All)?,
        rhs: RhsSpec {
            c: Forcing::ExpCosDist {
                a: 2.0,
                b: 1.0,
                k: -radius.cos(),
            },
            lambda: 1.0,
            mu: 0.0,
        },
        cap,
    })
}
