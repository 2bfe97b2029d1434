//! Symmetric eigendecomposition, spectral matrix functions, and the
//! eigenvalue ordering of `V W V` against `W` for contractions `V`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::trial_rng;

/// Off-diagonal Frobenius norm at which the rotation sweeps stop, relative
/// to the Frobenius norm of the input.
pub const EIGEN_TOL: f64 = 1e-13;
pub const EIGEN_MAX_SWEEPS: usize = 30;
pub const MAX_EIGEN_DIM: usize = 64;

/// Threshold for accepting a matrix as positive semidefinite.
pub const PSD_TOL: f64 = -1e-12;

/// A real symmetric matrix, symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    entries: DMatrix<f64>,
}

impl SymmetricMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows().max(1),
                got: entries.ncols(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("symmetric matrix entries"));
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        Ok(Self { entries: sym })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Self::new(m)
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// `a A + b B`.
    pub fn combine(&self, a: f64, other: &SymmetricMatrix, b: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Self::new(&self.entries * a + &other.entries * b)
    }

    /// `Q A Qᵀ` for an arbitrary square `Q`.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> Result<Self> {
        Self::new(q * &self.entries * q.transpose())
    }

    /// `V A V` for symmetric `V`.
    pub fn sandwich(&self, v: &SymmetricMatrix) -> Result<Self> {
        Self::new(&v.entries * &self.entries * &v.entries)
    }
}

/// Ascending eigenvalues with matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        &self.eigenvectors * lambda * self.eigenvectors.transpose()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }
}

/// Cyclic Jacobi rotation eigensolver.
pub fn eigen_sym(w: &SymmetricMatrix) -> Result<Spectrum> {
    let n = w.dim();
    if n > MAX_EIGEN_DIM {
        return Err(Error::Precondition(format!(
            "eigen_sym supports dim <= {MAX_EIGEN_DIM}, got {n}"
        )));
    }
    let mut a = w.entries().clone();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigen_sym input"));
    }
    let mut q = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);

    for _ in 0..EIGEN_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= EIGEN_TOL * scale {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- Gᵀ A G with the rotation acting on rows/cols p and r
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - s * akr;
                    a[(k, r)] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - s * ark;
                    a[(r, k)] = s * apk + c * ark;
                }
                a[(p, r)] = 0.0;
                a[(r, p)] = 0.0;
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |row, col| q[(row, order[col])]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// `Q ψ(Λ) Qᵀ`. `psi` reports its own domain errors.
pub fn matrix_function<F>(w: &SymmetricMatrix, psi: F) -> Result<SymmetricMatrix>
where
    F: Fn(f64) -> Result<f64>,
{
    let spec = eigen_sym(w)?;
    let mapped = spec
        .eigenvalues
        .iter()
        .map(|&k| psi(k))
        .collect::<Result<Vec<f64>>>()?;
    let lambda = DMatrix::from_diagonal(&DVector::from_vec(mapped));
    SymmetricMatrix::new(&spec.eigenvectors * lambda * spec.eigenvectors.transpose())
}

/// Rayleigh quotient `<W x, x> / |x|²`.
pub fn rayleigh(w: &SymmetricMatrix, x: &DVector<f64>) -> Result<f64> {
    if x.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: x.len(),
        });
    }
    let norm2 = x.norm_squared();
    if norm2 == 0.0 {
        return Err(Error::Precondition(
            "rayleigh quotient of the zero vector".into(),
        ));
    }
    Ok((w.entries() * x).dot(x) / norm2)
}

/// Whether `V` shrinks (`|Vx| <= |x|`) or stretches (`|Vx| >= |x|`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Contraction,
    Expansion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingVerdict {
    pub kind: MapKind,
    /// Ascending eigenvalues of `V W V`.
    pub sandwiched: Vec<f64>,
    /// Ascending eigenvalues of `W`.
    pub original: Vec<f64>,
    /// `max_i (λ_i - κ_i)` for contractions, `max_i (κ_i - λ_i)` for
    /// expansions. Non-positive when the ordering holds.
    pub max_violation: f64,
    pub ordered: bool,
}

/// Compares the ordered spectra of `V W V` and `W`.
///
/// Requires `W` positive semidefinite and `V` symmetric, invertible and of
/// the stated kind (norm tolerance `1e-12`).
pub fn spectrum_ordering_check(
    w: &SymmetricMatrix,
    v: &SymmetricMatrix,
    kind: MapKind,
    tolerance: f64,
) -> Result<OrderingVerdict> {
    if w.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: v.dim(),
        });
    }
    let ws = eigen_sym(w)?;
    if ws.min() < PSD_TOL {
        return Err(Error::Precondition(format!(
            "W is not positive semidefinite (min eigenvalue {:e})",
            ws.min()
        )));
    }
    let vs = eigen_sym(v)?;
    let abs: Vec<f64> = vs.eigenvalues.iter().map(|e| e.abs()).collect();
    let min_abs = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_abs = abs.iter().cloned().fold(0.0, f64::max);
    if min_abs <= 1e-14 * max_abs.max(1.0) {
        return Err(Error::Precondition("V is singular".into()));
    }
    match kind {
        MapKind::Contraction if max_abs > 1.0 + 1e-12 => {
            return Err(Error::Precondition(format!(
                "V is not a contraction (operator norm {max_abs})"
            )))
        }
        MapKind::Expansion if min_abs < 1.0 - 1e-12 => {
            return Err(Error::Precondition(format!(
                "V is not an expansion (smallest singular value {min_abs})"
            )))
        }
        _ => {}
    }
    let sandwiched = eigen_sym(&w.sandwich(v)?)?.eigenvalues;
    let original = ws.eigenvalues;
    let max_violation = sandwiched
        .iter()
        .zip(&original)
        .map(|(l, k)| match kind {
            MapKind::Contraction => l - k,
            MapKind::Expansion => k - l,
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(OrderingVerdict {
        kind,
        ordered: max_violation <= tolerance,
        sandwiched,
        original,
        max_violation,
    })
}

/// Haar-ish random orthogonal matrix from Gram-Schmidt on a Gaussian-like
/// sample.
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let qr = m.qr();
        let q = qr.q();
        if qr.r().diagonal().iter().all(|d: &f64| d.abs() > 1e-6) {
            return q;
        }
    }
}

/// Random symmetric matrix with prescribed eigenvalues.
pub fn with_spectrum<R: Rng + ?Sized>(eigenvalues: &[f64], rng: &mut R) -> SymmetricMatrix {
    let q = random_orthogonal(eigenvalues.len(), rng);
    let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues));
    SymmetricMatrix::new(&q * lambda * q.transpose()).expect("finite sample")
}

/// Random PSD matrix with eigenvalues in `[0, scale)` and occasionally a
/// zero eigenvalue.
pub fn random_psd<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> SymmetricMatrix {
    let mut eig: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..scale)).collect();
    if rng.gen_bool(0.1) {
        eig[0] = 0.0;
    }
    with_spectrum(&eig, rng)
}

/// Random symmetric matrix rescaled so its largest |eigenvalue| is uniform
/// in `(0, 1]`.
pub fn random_contraction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> SymmetricMatrix {
    loop {
        let raw = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let sym = SymmetricMatrix::new(raw).expect("finite sample");
        let spec = eigen_sym(&sym).expect("small matrix");
        let largest = spec.min().abs().max(spec.max().abs());
        let smallest = spec
            .eigenvalues
            .iter()
            .map(|e| e.abs())
            .fold(f64::INFINITY, f64::min);
        if smallest < 1e-6 * largest {
            continue;
        }
        let target = 1.0 - rng.gen_range(0.0..1.0);
        return SymmetricMatrix::new(sym.entries() * (target / largest)).expect("finite sample");
    }
}

/// Random symmetric matrix rescaled so its smallest |eigenvalue| is uniform
/// in `[1, 2)`.
pub fn random_expansion<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> SymmetricMatrix {
    loop {
        let raw = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let sym = SymmetricMatrix::new(raw).expect("finite sample");
        let spec = eigen_sym(&sym).expect("small matrix");
        let smallest = spec
            .eigenvalues
            .iter()
            .map(|e| e.abs())
            .fold(f64::INFINITY, f64::min);
        let largest = spec.min().abs().max(spec.max().abs());
        if smallest < 1e-2 * largest {
            continue;
        }
        let target = rng.gen_range(1.0..2.0);
        return SymmetricMatrix::new(sym.entries() * (target / smallest)).expect("finite sample");
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingSuite {
    pub kind: MapKind,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Trials with `max_violation > tolerance`.
    pub violations: usize,
    pub worst_violation: f64,
    pub worst_trial: usize,
}

/// Randomized trials of [`spectrum_ordering_check`] with PSD `W` and a
/// random contraction or expansion `V`, dimensions 2 to 6.
pub fn ordering_suite(
    kind: MapKind,
    trials: usize,
    seed: u64,
    tolerance: f64,
) -> Result<OrderingSuite> {
    if trials == 0 {
        return Err(Error::Precondition("need at least one trial".into()));
    }
    let results: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let dim = rng.gen_range(2..=6);
            let scale = rng.gen_range(0.1..10.0);
            let w = random_psd(dim, scale, &mut rng);
            let v = match kind {
                MapKind::Contraction => random_contraction(dim, &mut rng),
                MapKind::Expansion => random_expansion(dim, &mut rng),
            };
            spectrum_ordering_check(&w, &v, kind, tolerance).map(|r| r.max_violation)
        })
        .collect::<Result<_>>()?;
    let (worst_trial, worst_violation) = results
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    Ok(OrderingSuite {
        kind,
        trials,
        seed,
        tolerance,
        violations: results.iter().filter(|v| **v > tolerance).count(),
        worst_violation,
        worst_trial,
    })
}
