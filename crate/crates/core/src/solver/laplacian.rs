//! Laplace–Beltrami operator on a cap of `S²` in geodesic polar coordinates,
//! `Δu = u_rr + cot r u_r + u_θθ / sin² r`.

use super::grid::{GridField, PolarGrid};
use crate::error::Result;

/// Weights `(node, coefficient)` of the centred stencil at node `k`, which
/// must not lie on the boundary ring. At the pole the operator is replaced
/// by `4 (ū₁ - u₀) / h²`, `ū₁` the mean over the first ring.
pub fn stencil(grid: &PolarGrid, k: usize) -> Vec<(usize, f64)> {
    let h = grid.hr();
    let nt = grid.ntheta();
    let (i, j) = grid.ring_angle(k);
    debug_assert!(i < grid.nr(), "stencil requested on the boundary");
    if i == 0 {
        let w = 4.0 / (h * h * nt as f64);
        let mut row = Vec::with_capacity(nt + 1);
        row.push((0, -4.0 / (h * h)));
        row.extend((0..nt).map(|jj| (grid.index(1, jj), w)));
        return row;
    }
    let r = grid.r(i);
    let cot = r.cos() / r.sin();
    let s = r.sin();
    let ang = 1.0 / (s * s * grid.htheta() * grid.htheta());
    let outer = 1.0 / (h * h) + cot / (2.0 * h);
    let inner = 1.0 / (h * h) - cot / (2.0 * h);
    vec![
        (k, -2.0 / (h * h) - 2.0 * ang),
        (grid.index(i + 1, j), outer),
        (grid.index(i - 1, j), inner),
        (grid.index(i, j + 1), ang),
        (grid.index(i, j + nt - 1), ang),
    ]
}

/// Discrete Laplacian at every node. Boundary nodes use second-order
/// one-sided differences in `r`.
pub fn discrete_laplacian(field: &GridField) -> Result<GridField> {
    let grid = *field.grid();
    let u = field.values();
    let h = grid.hr();
    let nt = grid.ntheta();
    let nr = grid.nr();
    let mut out = vec![0.0; grid.num_nodes()];
    for (k, slot) in out.iter_mut().enumerate().take(grid.num_interior()) {
        *slot = stencil(&grid, k).iter().map(|&(m, c)| c * u[m]).sum();
    }
    let r = grid.radius();
    let (sin, cot) = (r.sin(), r.cos() / r.sin());
    let ht = grid.htheta();
    for j in 0..nt {
        let at = |i: usize| field.get(i, j);
        let urr = (2.0 * at(nr) - 5.0 * at(nr - 1) + 4.0 * at(nr - 2) - at(nr - 3)) / (h * h);
        let ur = (3.0 * at(nr) - 4.0 * at(nr - 1) + at(nr - 2)) / (2.0 * h);
        let utt = (field.get(nr, j + 1) - 2.0 * at(nr) + field.get(nr, j + nt - 1)) / (ht * ht);
        out[grid.index(nr, j)] = urr + cot * ur + utt / (sin * sin);
    }
    GridField::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    fn max_err(n: usize, u: impl Fn(f64, f64) -> f64, lap: impl Fn(f64, f64) -> f64) -> f64 {
        let g = PolarGrid::new(n, n, FRAC_PI_3).unwrap();
        let f = GridField::from_fn(g, &u).unwrap();
        let exact = GridField::from_fn(g, &lap).unwrap();
        discrete_laplacian(&f)
            .unwrap()
            .max_abs_diff(&exact)
            .unwrap()
    }

    #[test]
    fn constants_are_harmonic() {
        let g = PolarGrid::new(8, 8, 1.0).unwrap();
        let f = GridField::from_fn(g, |_, _| 3.5).unwrap();
        let lap = discrete_laplacian(&f).unwrap();
        assert!(lap.values().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn cos_r_is_second_order() {
        let coarse = max_err(16, |r, _| r.cos(), |r, _| -2.0 * r.cos());
        let fine = max_err(32, |r, _| r.cos(), |r, _| -2.0 * r.cos());
        let ratio = coarse / fine;
        assert!((3.5..4.6).contains(&ratio), "ratio {ratio}");
        assert!(fine < 1e-3);
    }

    /// Errors at each node together with its radius.
    fn nodal_errors(
        n: usize,
        u: impl Fn(f64, f64) -> f64,
        lap: impl Fn(f64, f64) -> f64,
    ) -> Vec<(f64, f64)> {
        let g = PolarGrid::new(n, n, FRAC_PI_3).unwrap();
        let f = GridField::from_fn(g, &u).unwrap();
        let exact = GridField::from_fn(g, &lap).unwrap();
        let l = discrete_laplacian(&f).unwrap();
        (0..g.num_nodes())
            .map(|k| (g.polar(k).0, (l.values()[k] - exact.values()[k]).abs()))
            .collect()
    }

    // The first harmonic behaves like r near the pole, so the cot r and
    // 1/sin² r factors turn the O(h²) stencil error into O(h²/r).
    #[test]
    fn first_harmonic_is_second_order_away_from_the_pole() {
        let u = |r: f64, t: f64| r.sin() * t.cos();
        let lap = |r: f64, t: f64| -2.0 * r.sin() * t.cos();
        let annulus = |n| {
            nodal_errors(n, u, lap)
                .into_iter()
                .filter(|(r, _)| *r >= FRAC_PI_3 / 4.0)
                .fold(0.0f64, |m, (_, e)| m.max(e))
        };
        let ratio = annulus(16) / annulus(32);
        assert!((3.5..4.6).contains(&ratio), "ratio {ratio}");
        let weighted = |n| {
            nodal_errors(n, u, lap)
                .into_iter()
                .fold(0.0f64, |m, (r, e)| m.max(r * e))
        };
        let ratio = weighted(16) / weighted(32);
        assert!((3.5..4.6).contains(&ratio), "weighted ratio {ratio}");
    }
}
