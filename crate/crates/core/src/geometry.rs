//! Closed-form geometry of the round unit sphere `S^n ⊂ R^{n+1}`.
//!
//! Points and tangent vectors live in the ambient embedding. Geodesic
//! segments are parametrized on `[-1, 1]`, so a segment of length `d`
//! has constant speed `d / 2`.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Below this norm a vector cannot be normalized onto the sphere.
pub const MIN_POINT_NORM: f64 = 1e-10;

/// Pairs with `|x + y|` at or below this gap are treated as antipodal.
pub const ANTIPODAL_GAP: f64 = 1e-8;

/// A point on the unit sphere, stored as a unit vector of the ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: DVector<f64>,
}

impl SpherePoint {
    /// Normalizes `coords` onto the sphere. The ambient dimension must be at
    /// least 3 (sphere dimension `n >= 2`).
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("sphere point coordinates"));
        }
        if coords.len() < 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: coords.len(),
            });
        }
        let norm = coords.norm();
        if norm <= MIN_POINT_NORM {
            return Err(Error::DegenerateVector { norm });
        }
        Ok(Self {
            coords: coords / norm,
        })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    /// Intrinsic dimension `n` of the sphere this point lives on.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn ambient_dim(&self) -> usize {
        self.coords.len()
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.coords.dot(&other.coords)
    }

    fn check_same_dim(&self, other: &SpherePoint) -> Result<()> {
        if self.coords.len() != other.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                got: other.coords.len(),
            });
        }
        Ok(())
    }
}

/// Tangent vector at a base point. The normal component is projected out on
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: SpherePoint,
    vec: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: SpherePoint, vec: DVector<f64>) -> Result<Self> {
        if vec.len() != base.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: base.ambient_dim(),
                got: vec.len(),
            });
        }
        if vec.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("tangent vector"));
        }
        let normal = vec.dot(base.coords());
        let vec = vec - base.coords() * normal;
        Ok(Self { base, vec })
    }

    pub fn zero(base: SpherePoint) -> Self {
        let vec = DVector::zeros(base.ambient_dim());
        Self { base, vec }
    }

    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    pub fn vec(&self) -> &DVector<f64> {
        &self.vec
    }

    pub fn into_vec(self) -> DVector<f64> {
        self.vec
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }

    pub fn dot(&self, other: &TangentVector) -> f64 {
        self.vec.dot(&other.vec)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            base: self.base.clone(),
            vec: &self.vec * factor,
        }
    }
}

/// Geodesic distance, computed as `2 atan2(|x - y|, |x + y|)`.
///
/// This equals `arccos <x, y>` but keeps full relative accuracy for nearby
/// and nearly antipodal pairs.
pub fn distance(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    x.check_same_dim(y)?;
    let diff = (x.coords() - y.coords()).norm();
    let sum = (x.coords() + y.coords()).norm();
    Ok((2.0 * diff.atan2(sum)).clamp(0.0, std::f64::consts::PI))
}

/// Exponential map `exp_p(v) = cos|v| p + sin|v| v/|v|`.
pub fn exp_map(v: &TangentVector) -> SpherePoint {
    let norm = v.norm();
    if norm == 0.0 {
        return v.base().clone();
    }
    let coords = v.base().coords() * norm.cos() + v.vec() * (norm.sin() / norm);
    SpherePoint::new(coords).expect("exp map stays on the sphere")
}

/// Logarithm map: the tangent vector at `x` of length `d(x, y)` pointing to `y`.
pub fn log_map(x: &SpherePoint, y: &SpherePoint) -> Result<TangentVector> {
    x.check_same_dim(y)?;
    check_not_antipodal(x, y)?;
    let theta = distance(x, y)?;
    if theta == 0.0 {
        return Ok(TangentVector::zero(x.clone()));
    }
    let direction = unit_direction(x, y);
    TangentVector::new(x.clone(), direction * theta)
}

fn check_not_antipodal(x: &SpherePoint, y: &SpherePoint) -> Result<()> {
    let gap = (x.coords() + y.coords()).norm();
    if gap <= ANTIPODAL_GAP {
        return Err(Error::Antipodal { gap });
    }
    Ok(())
}

/// Unit tangent at `x` pointing along the minimizing geodesic to `y != x`.
fn unit_direction(x: &SpherePoint, y: &SpherePoint) -> DVector<f64> {
    let raw = y.coords() - x.coords() * x.dot(y);
    let norm = raw.norm();
    if norm > 0.0 {
        return raw / norm;
    }
    // y numerically on x: fall back to the chord direction
    let chord = y.coords() - x.coords();
    let chord = &chord - x.coords() * chord.dot(x.coords());
    let n = chord.norm();
    if n > 0.0 {
        chord / n
    } else {
        DVector::zeros(x.ambient_dim())
    }
}

/// The minimizing geodesic `γ: [-1, 1] → S^n` from `x` to `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSegment {
    x: SpherePoint,
    y: SpherePoint,
    length: f64,
    sin_length: f64,
}

impl GeodesicSegment {
    pub fn new(x: &SpherePoint, y: &SpherePoint) -> Result<Self> {
        x.check_same_dim(y)?;
        check_not_antipodal(x, y)?;
        let length = distance(x, y)?;
        Ok(Self {
            x: x.clone(),
            y: y.clone(),
            length,
            sin_length: length.sin(),
        })
    }

    pub fn start(&self) -> &SpherePoint {
        &self.x
    }

    pub fn end(&self) -> &SpherePoint {
        &self.y
    }

    /// Constant speed `|γ̇| = d(x, y) / 2`.
    pub fn speed(&self) -> f64 {
        0.5 * self.length
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_degenerate(&self) -> bool {
        self.length == 0.0
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    fn check_param(t: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&t) {
            return Err(Error::Domain {
                value: t,
                domain: "geodesic parameter interval [-1, 1]",
            });
        }
        Ok(())
    }

    /// Great-circle interpolation. The weights at `t = 0` are equal, so the
    /// midpoint is bitwise symmetric in the two endpoints.
    pub fn point(&self, t: f64) -> Result<SpherePoint> {
        Self::check_param(t)?;
        if self.is_degenerate() || t == -1.0 {
            return Ok(self.x.clone());
        }
        if t == 1.0 {
            return Ok(self.y.clone());
        }
        let tau = 0.5 * (t + 1.0);
        let wx = ((1.0 - tau) * self.length).sin() / self.sin_length;
        let wy = (tau * self.length).sin() / self.sin_length;
        let coords = self.x.coords() * wx + self.y.coords() * wy;
        SpherePoint::new(coords)
    }

    /// Ambient velocity `γ̇(t)` without the tangent-space wrapper.
    fn velocity_raw(&self, t: f64) -> DVector<f64> {
        let tau = 0.5 * (t + 1.0);
        let scale = 0.5 * self.length / self.sin_length;
        let wx = -((1.0 - tau) * self.length).cos() * scale;
        let wy = (tau * self.length).cos() * scale;
        self.x.coords() * wx + self.y.coords() * wy
    }

    pub fn velocity(&self, t: f64) -> Result<TangentVector> {
        let base = self.point(t)?;
        if self.is_degenerate() {
            return Ok(TangentVector::zero(base));
        }
        TangentVector::new(base, self.velocity_raw(t))
    }

    /// Unit tangent `E_0(t) = γ̇(t)/|γ̇|`.
    pub fn unit_tangent(&self, t: f64) -> Result<TangentVector> {
        if self.is_degenerate() {
            return Err(Error::DegenerateSegment);
        }
        let v = self.velocity(t)?;
        let norm = v.norm();
        Ok(v.scaled(1.0 / norm))
    }
}

/// Transports `v`, based at `γ(t0)`, to `γ(t1)` along the segment.
///
/// On a great circle the tangential component rotates with the geodesic and
/// the component orthogonal to the plane of the circle is constant.
pub fn parallel_transport(
    v: &TangentVector,
    seg: &GeodesicSegment,
    t0: f64,
    t1: f64,
) -> Result<TangentVector> {
    let from = seg.point(t0)?;
    let to = seg.point(t1)?;
    let offset = (v.base().coords() - from.coords()).norm();
    if v.base().ambient_dim() != from.ambient_dim() || offset > 1e-10 {
        return Err(Error::Precondition(format!(
            "vector is not based at the segment point for t0 = {t0} (offset {offset:e})"
        )));
    }
    if seg.is_degenerate() || t0 == t1 {
        return TangentVector::new(to, v.vec().clone());
    }
    let e0_from = seg.unit_tangent(t0)?;
    let e0_to = seg.unit_tangent(t1)?;
    let along = v.vec().dot(e0_from.vec());
    let rest = v.vec() - e0_from.vec() * along;
    TangentVector::new(to, rest + e0_to.vec() * along)
}

/// Parallel orthonormal frame `(E_0, ..., E_{n-1})` along a segment, with
/// `E_0` tangential.
#[derive(Debug, Clone)]
pub struct ParallelFrame {
    segment: GeodesicSegment,
    normals: Vec<DVector<f64>>,
}

impl ParallelFrame {
    pub fn new(segment: &GeodesicSegment) -> Result<Self> {
        if segment.is_degenerate() {
            return Err(Error::DegenerateSegment);
        }
        let x = segment.start().coords().clone();
        let e0 = segment.unit_tangent(-1.0)?.into_vec();
        let dim = x.len();
        let mut basis: Vec<DVector<f64>> = vec![x, e0];
        let mut normals = Vec::with_capacity(dim - 2);
        for k in 0..dim {
            if normals.len() == dim - 2 {
                break;
            }
            let mut candidate = DVector::zeros(dim);
            candidate[k] = 1.0;
            // two passes of Gram-Schmidt for orthogonality to roundoff
            for _ in 0..2 {
                for b in &basis {
                    let c = candidate.dot(b);
                    candidate -= b * c;
                }
            }
            let norm = candidate.norm();
            if norm > 1e-6 {
                let unit = candidate / norm;
                basis.push(unit.clone());
                normals.push(unit);
            }
        }
        Ok(Self {
            segment: segment.clone(),
            normals,
        })
    }

    pub fn segment(&self) -> &GeodesicSegment {
        &self.segment
    }

    /// Number of frame vectors (the sphere dimension `n`).
    pub fn len(&self) -> usize {
        self.normals.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `E_i(t)`.
    pub fn vector(&self, i: usize, t: f64) -> Result<TangentVector> {
        if i == 0 {
            return self.segment.unit_tangent(t);
        }
        let normal = self.normals.get(i - 1).ok_or(Error::DimensionMismatch {
            expected: self.len(),
            got: i + 1,
        })?;
        TangentVector::new(self.segment.point(t)?, normal.clone())
    }

    pub fn at(&self, t: f64) -> Result<Vec<TangentVector>> {
        (0..self.len()).map(|i| self.vector(i, t)).collect()
    }

    /// Coefficients of `v` (based at `γ(t)`) against the frame at `t`.
    pub fn coefficients(&self, v: &TangentVector, t: f64) -> Result<Vec<f64>> {
        let frame = self.at(t)?;
        Ok(frame.iter().map(|e| e.vec().dot(v.vec())).collect())
    }

    /// `Σ c_i E_i(t)` as an ambient vector.
    pub fn combine(&self, coefficients: &[f64], t: f64) -> Result<DVector<f64>> {
        let dim = self.segment.start().ambient_dim();
        let mut out = DVector::zeros(dim);
        for (i, c) in coefficients.iter().enumerate() {
            if *c != 0.0 {
                out += self.vector(i, t)?.vec() * *c;
            }
        }
        Ok(out)
    }
}

/// Orthonormal basis of `T_p S^n` obtained by Gram-Schmidt on the standard
/// basis.
pub fn tangent_basis(p: &SpherePoint) -> Vec<DVector<f64>> {
    let dim = p.ambient_dim();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim - 1);
    for k in 0..dim {
        if basis.len() == dim - 1 {
            break;
        }
        let mut candidate = DVector::zeros(dim);
        candidate[k] = 1.0;
        for _ in 0..2 {
            let c = candidate.dot(p.coords());
            candidate -= p.coords() * c;
            for b in &basis {
                let c = candidate.dot(b);
                candidate -= b * c;
            }
        }
        let norm = candidate.norm();
        if norm > 1e-6 {
            basis.push(candidate / norm);
        }
    }
    basis
}
