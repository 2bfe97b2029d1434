use crate::error::{Error, Result};

/// Square band matrix, stored row by row from column `i - lower` to
/// `i + upper`.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(
            j + self.lower >= i && j <= i + self.upper,
            "({i}, {j}) outside band"
        );
        i * (self.lower + self.upper + 1) + (j + self.lower - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.lower < i || j > i + self.upper {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self.slot(i, j);
        self.data[k] += value;
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.lower);
                let hi = (i + self.upper).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Gaussian elimination without pivoting, overwriting `rhs` with the
    /// solution. Intended for diagonally dominant systems, where the band
    /// is preserved and no pivoting is needed.
    pub fn solve_in_place(mut self, rhs: &mut [f64]) -> Result<()> {
        let n = self.n;
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * 1e-14;
        let width = self.lower + self.upper + 1;
        for k in 0..n {
            let pivot = self.data[self.slot(k, k)];
            if !(pivot.abs() > tiny) {
                return Err(Error::Singular { row: k });
            }
            let last_row = (k + self.lower).min(n - 1);
            let last_col = (k + self.upper).min(n - 1);
            for i in k + 1..=last_row {
                let ik = self.slot(i, k);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                let row_i = i * width + self.lower - i;
                let row_k = k * width + self.lower - k;
                for j in k + 1..=last_col {
                    self.data[row_i + j] -= l * self.data[row_k + j];
                }
                rhs[i] -= l * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.upper).min(n - 1);
            let s = (k + 1..=last_col).fold(rhs[k], |s, j| s - self.data[self.slot(k, j)] * rhs[j]);
            rhs[k] = s / self.data[self.slot(k, k)];
        }
        Ok(())
    }
}

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let mut c = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Singular { row: 0 });
    }
    c[0] = sup[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - sub[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Singular { row: i });
        }
        c[i] = sup[i] / denom;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}
