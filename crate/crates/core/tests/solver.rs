use std::f64::consts::FRAC_PI_3;

use sphere_concavity::field::ScalarField;
use sphere_concavity::operators::{Cone, Forcing, IsotropicOperator, Phi, Psi, RhsSpec};
use sphere_concavity::solver::{
    manufactured_case, radial_exp_case, solve_radial, solve_semilinear, PolarGrid, SolveSettings,
};
use sphere_concavity::Error;

fn semilinear_error(n: usize) -> (f64, f64) {
    let case = manufactured_case(FRAC_PI_3).unwrap();
    let grid = PolarGrid::new(n, n, FRAC_PI_3).unwrap();
    let (u, stats) =
        solve_semilinear(&case.operator, &case.rhs, grid, &SolveSettings::default()).unwrap();
    let exact = case.exact_field();
    let err = (0..grid.num_nodes())
        .map(|k| {
            let (r, t) = grid.polar(k);
            (u.values()[k] - exact.value(&case.cap.point_at(r, t)).unwrap()).abs()
        })
        .fold(0.0, f64::max);
    (err, stats.residual)
}

#[test]
fn manufactured_semilinear_converges_at_second_order() {
    let (e16, r16) = semilinear_error(16);
    let (e32, r32) = semilinear_error(32);
    assert!(r16 <= 1e-10 && r32 <= 1e-10);
    let order = (e16 / e32).log2();
    assert!(order >= 1.7, "order {order}, errors {e16:e} {e32:e}");
}

#[test]
fn radial_identity_matches_two_dimensional_profile() {
    let case = manufactured_case(FRAC_PI_3).unwrap();
    let n = 24;
    let grid = PolarGrid::new(n, n, FRAC_PI_3).unwrap();
    let s = SolveSettings::default();
    let (two_d, _) = solve_semilinear(&case.operator, &case.rhs, grid, &s).unwrap();
    let (radial, stats) = solve_radial(&case.operator, &case.rhs, FRAC_PI_3, n, &s).unwrap();
    assert!(stats.residual <= 1e-10);
    let diff = radial.to_grid(n).unwrap().max_abs_diff(&two_d).unwrap();
    assert!(diff <= 1e-8, "difference {diff:e}");
}

#[test]
fn radial_exp_case_is_second_order() {
    let case = radial_exp_case(FRAC_PI_3).unwrap();
    let err = |n: usize| {
        let (u, stats) = solve_radial(
            &case.operator,
            &case.rhs,
            FRAC_PI_3,
            n,
            &SolveSettings::default(),
        )
        .unwrap();
        assert!(stats.residual <= 1e-10);
        (0..=n)
            .map(|i| (u.values()[i] - case.exact(u.r(i))).abs())
            .fold(0.0, f64::max)
    };
    let (a, b) = (err(32), err(64));
    assert!((a / b).log2() >= 1.7, "errors {a:e} {b:e}");
    assert!(b < 1e-4);
}

#[test]
fn radial_with_gradient_term_matches_two_dimensional() {
    let op = IsotropicOperator::new(Psi::Identity, Phi::Linear { slope: 0.5 }, Cone::All).unwrap();
    let rhs = RhsSpec {
        c: Forcing::CosDist { a: 2.0, k: 0.0 },
        lambda: 1.0,
        mu: 0.25,
    };
    let n = 16;
    let s = SolveSettings::default();
    let (two_d, _) = solve_semilinear(&op, &rhs, PolarGrid::new(n, n, 1.0).unwrap(), &s).unwrap();
    let (radial, _) = solve_radial(&op, &rhs, 1.0, n, &s).unwrap();
    assert!(radial.to_grid(n).unwrap().max_abs_diff(&two_d).unwrap() <= 1e-8);
}

#[test]
fn exhausted_budget_reports_last_residual() {
    let case = radial_exp_case(FRAC_PI_3).unwrap();
    let s = SolveSettings {
        tol: 1e-10,
        max_iter: 1,
    };
    match solve_radial(&case.operator, &case.rhs, FRAC_PI_3, 16, &s) {
        Err(Error::MaxIter {
            iterations: 1,
            residual,
        }) => assert!(residual > 1e-10),
        other => panic!("unexpected {other:?}"),
    }
}
