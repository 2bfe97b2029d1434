//! End-to-end acceptance checks. Prints one `[PASS]`/`[FAIL]` line per
//! criterion and exits non-zero if any fails.

use std::f64::consts::FRAC_PI_3;
use std::process::ExitCode;
use std::time::Instant;

use sphere_concavity::cap::CapDomain;
use sphere_concavity::config::VerificationSettings;
use sphere_concavity::field::{CosineField, GreatCircleDistance, ScalarField};
use sphere_concavity::geometry::SpherePoint;
use sphere_concavity::jacobi::{FD_STEP_FIRST, FD_STEP_SECOND};
use sphere_concavity::lemmas::{jacobi_suite_in_cap, k_suite};
use sphere_concavity::operators::{
    check_f_hypotheses, Cone, Forcing, IsotropicOperator, Phi, Psi, RhsSpec,
};
use sphere_concavity::solver::{
    manufactured_case, radial_exp_case, solve_radial, solve_semilinear, GridField, GridInterpolant,
    PolarGrid, SolveSettings,
};
use sphere_concavity::spectral::{ordering_suite, MapKind};
use sphere_concavity::verify::{
    full_report, geodesic_concavity_scan, gradient_norm_check, grid_tolerance, scan_z_min, Verdict,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("error: {e:?}")
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let cap = CapDomain::north(FRAC_PI_3).map_err(err)?;
    let suite = jacobi_suite_in_cap(&cap, 100, 11, FD_STEP_FIRST).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    ensure(
        suite.max_deviation <= 1e-6 && secs < 5.0,
        format!(
            "max deviation {:.3e} over 100 pairs, {secs:.2} s",
            suite.max_deviation
        ),
    )
}

fn ac2() -> Outcome {
    let start = Instant::now();
    let s = k_suite(0.1, 1.4, 20, 12, FD_STEP_SECOND).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    ensure(
        s.k1_sup <= 1e-4
            && s.k2_at_zero <= 1e-4
            && s.k3_at_zero <= 1e-4
            && s.endpoint_sup <= 1e-5
            && s.ev_k_residual <= 1e-4
            && secs < 30.0,
        format!(
            "K1 {:.2e}, K2(0) {:.2e}, K3(0) {:.2e}, ends {:.2e}, Ev-K {:.2e}, {secs:.2} s",
            s.k1_sup, s.k2_at_zero, s.k3_at_zero, s.endpoint_sup, s.ev_k_residual
        ),
    )
}

fn ac3() -> Outcome {
    let start = Instant::now();
    let c = ordering_suite(MapKind::Contraction, 10_000, 13, 1e-10).map_err(err)?;
    let e = ordering_suite(MapKind::Expansion, 10_000, 13, 1e-10).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    ensure(
        c.violations == 0 && e.violations == 0 && secs < 10.0,
        format!(
            "violations {}/{}, worst {:.2e}/{:.2e}, {secs:.2} s",
            c.violations, e.violations, c.worst_violation, e.worst_violation
        ),
    )
}

fn ac4() -> Outcome {
    let linear = Phi::Linear { slope: 1.0 };
    let mut worst = f64::NEG_INFINITY;
    let mut all_pass = true;
    for (psi, cone) in [
        (Psi::Identity, Cone::All),
        (Psi::Exp, Cone::All),
        (Psi::Power { p: 2.0 }, Cone::Positive),
    ] {
        let op = IsotropicOperator::new(psi, linear.clone(), cone).map_err(err)?;
        let r = check_f_hypotheses(&op, 10_000, 14).map_err(err)?;
        for name in [
            "monotone_in_gradient",
            "monotone_in_eigenvalues",
            "midpoint_convex",
        ] {
            let c = r.check(name).ok_or("missing check")?;
            worst = worst.max(c.worst_violation);
            all_pass &= c.passed && c.worst_violation <= 1e-12;
        }
    }
    let concave = IsotropicOperator::new(Psi::NegExpNeg, Phi::Zero, Cone::All).map_err(err)?;
    let decreasing =
        IsotropicOperator::new(Psi::Exp, Phi::Linear { slope: -1.0 }, Cone::All).map_err(err)?;
    let rc = check_f_hypotheses(&concave, 10_000, 14).map_err(err)?;
    let rd = check_f_hypotheses(&decreasing, 10_000, 14).map_err(err)?;
    let caught = |r: &sphere_concavity::operators::HypothesisReport, name: &str| {
        r.check(name)
            .map(|c| !c.passed && c.worst_violation > 0.0 && c.witness.is_some())
            .unwrap_or(false)
    };
    let caught_concave = caught(&rc, "midpoint_convex");
    let caught_decreasing = caught(&rd, "monotone_in_gradient");
    ensure(
        all_pass && caught_concave && caught_decreasing,
        format!(
            "worst sampled violation {worst:.2e}; counterexamples caught: concave psi {caught_concave}, decreasing phi {caught_decreasing}"
        ),
    )
}

fn semilinear_error(n: usize) -> Result<(f64, f64, GridField), String> {
    let case = manufactured_case(FRAC_PI_3).map_err(err)?;
    let grid = PolarGrid::new(n, n, FRAC_PI_3).map_err(err)?;
    let (u, stats) = solve_semilinear(&case.operator, &case.rhs, grid, &SolveSettings::default())
        .map_err(err)?;
    let exact = GridField::from_fn(grid, |r, _| case.exact(r)).map_err(err)?;
    Ok((u.max_abs_diff(&exact).map_err(err)?, stats.residual, u))
}

fn ac5(solved: &mut Option<GridField>) -> Outcome {
    let start = Instant::now();
    let mut errors = Vec::new();
    let mut residual = 0.0f64;
    for n in [32, 64, 128] {
        let (e, r, u) = semilinear_error(n)?;
        errors.push(e);
        residual = residual.max(r);
        if n == 128 {
            *solved = Some(u);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let (x, y): (Vec<f64>, Vec<f64>) = [32.0f64, 64.0, 128.0]
        .iter()
        .zip(&errors)
        .map(|(n, e)| ((1.0 / n).log2(), e.log2()))
        .unzip();
    let order = fit_slope(&x, &y);
    ensure(
        residual <= 1e-10 && order >= 1.7 && secs < 60.0,
        format!(
            "errors {:.3e} {:.3e} {:.3e}, fitted order {order:.3}, residual {residual:.1e}, {secs:.1} s",
            errors[0], errors[1], errors[2]
        ),
    )
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn ac6() -> Outcome {
    let case = radial_exp_case(FRAC_PI_3).map_err(err)?;
    let s = SolveSettings::default();
    let mut errors = Vec::new();
    for n in [32, 64, 128] {
        let (u, stats) = solve_radial(&case.operator, &case.rhs, FRAC_PI_3, n, &s).map_err(err)?;
        if stats.residual > 1e-10 {
            return Err(format!("radial residual {:.2e} at n = {n}", stats.residual));
        }
        errors.push(
            (0..=n)
                .map(|i| (u.values()[i] - case.exact(u.r(i))).abs())
                .fold(0.0, f64::max),
        );
    }
    let x: Vec<f64> = [32.0f64, 64.0, 128.0]
        .iter()
        .map(|n| (1.0 / n).log2())
        .collect();
    let y: Vec<f64> = errors.iter().map(|e| e.log2()).collect();
    let order = fit_slope(&x, &y);

    let lap = manufactured_case(FRAC_PI_3).map_err(err)?;
    let n = 64;
    let grid = PolarGrid::new(n, n, FRAC_PI_3).map_err(err)?;
    let (two_d, _) = solve_semilinear(&lap.operator, &lap.rhs, grid, &s).map_err(err)?;
    let (radial, _) = solve_radial(&lap.operator, &lap.rhs, FRAC_PI_3, n, &s).map_err(err)?;
    let diff = radial
        .to_grid(n)
        .map_err(err)?
        .max_abs_diff(&two_d)
        .map_err(err)?;
    ensure(
        order >= 1.7 && diff <= 1e-6,
        format!(
            "exp case errors {:.3e} {:.3e} {:.3e} (order {order:.3}); identity vs 2-D profile {diff:.2e}",
            errors[0], errors[1], errors[2]
        ),
    )
}

fn ac7(solved: Option<GridField>) -> Outcome {
    let cap = CapDomain::north(FRAC_PI_3).map_err(err)?;
    let case = manufactured_case(FRAC_PI_3).map_err(err)?;
    let exact = case.exact_field();
    let scan = scan_z_min(&exact, &cap, 100_000, 17).map_err(err)?;
    let geo = geodesic_concavity_scan(&exact, &cap, 1_000, 17, 17).map_err(err)?;

    let field = match solved {
        Some(f) => f,
        None => semilinear_error(128)?.2,
    };
    let grid = *field.grid();
    let tol = grid_tolerance(&grid, &cap).map_err(err)?;
    let interp = GridInterpolant::new(field, cap.clone()).map_err(err)?;
    let settings = VerificationSettings {
        seed: 17,
        ..VerificationSettings::default()
    };
    let report =
        full_report(&case.operator, &case.rhs, &cap, &interp, &settings, tol).map_err(err)?;

    let convex = CosineField::new(cap.pole().clone(), -1.0, 0.0);
    let convex_rhs = RhsSpec {
        c: Forcing::CosDist { a: -2.0, k: 0.0 },
        lambda: 1.0,
        mu: 0.0,
    };
    let small = VerificationSettings {
        num_pairs: 10_000,
        hypothesis_trials: 1_000,
        ..settings.clone()
    };
    let inverted = full_report(
        &IsotropicOperator::laplacian(),
        &convex_rhs,
        &cap,
        &convex,
        &small,
        1e-12,
    )
    .map_err(err)?;
    ensure(
        scan.min_z >= -1e-12
            && geo.worst <= 1e-10
            && report.min_z >= -1e-3
            && report.min_z >= -tol
            && report.boundary_margin > 0.0
            && report.verdict == Verdict::Pass
            && inverted.min_z < 0.0
            && inverted.verdict == Verdict::Fail,
        format!(
            "analytic min Z {:.2e}, geodesic worst {:.2e}; 128² min Z {:.2e} (tolerance {tol:.2e}), margin {:.3e}, verdict {:?}; -cos d min Z {:.2e}, verdict {:?}",
            scan.min_z, geo.worst, report.min_z, report.boundary_margin, report.verdict, inverted.min_z, inverted.verdict
        ),
    )
}

fn ac8() -> Outcome {
    let big = CapDomain::north(FRAC_PI_3).map_err(err)?;
    let tilted = SpherePoint::from_slice(&[0.2, -0.1, 0.95]).map_err(err)?;
    let mut fields: Vec<(Box<dyn ScalarField>, CapDomain)> = vec![
        (
            Box::new(manufactured_case(FRAC_PI_3).map_err(err)?.exact_field()),
            big.clone(),
        ),
        (Box::new(CosineField::new(tilted, 2.5, 0.1)), big),
    ];
    // cap of radius π/8 strictly inside the hemisphere about m, m outside it
    let small = CapDomain::north(std::f64::consts::PI / 8.0).map_err(err)?;
    let m = small.point_at(std::f64::consts::PI / 6.0, 0.4);
    fields.push((Box::new(GreatCircleDistance { pole: m }), small));

    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_mismatch = 0.0f64;
    let mut all = true;
    for (k, (u, cap)) in fields.iter().enumerate() {
        let scan = scan_z_min(u.as_ref(), cap, 100_000, 18 + k as u64).map_err(err)?;
        let x = SpherePoint::from_slice(&scan.argmin.x).map_err(err)?;
        let y = SpherePoint::from_slice(&scan.argmin.y).map_err(err)?;
        let check = gradient_norm_check(u.as_ref(), cap, &x, &y).map_err(err)?;
        worst_excess = worst_excess.max(check.excess);
        worst_mismatch = worst_mismatch.max(check.mismatch);
        all &= check.passed;
    }
    ensure(
        all,
        format!("|∇u_z| - |∇u_x| at most {worst_excess:.2e}, ||∇u_x| - |∇u_y|| at most {worst_mismatch:.2e}"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut solved = None;
    let results: Vec<(&str, &str, Outcome)> = vec![
        ("AC1", "Jacobi closed form vs finite differences", ac1()),
        ("AC2", "second endpoint variations", ac2()),
        ("AC3", "spectral ordering", ac3()),
        ("AC4", "operator hypothesis suites", ac4()),
        (
            "AC5",
            "manufactured semilinear convergence",
            ac5(&mut solved),
        ),
        ("AC6", "radial fully nonlinear case", ac6()),
        ("AC7", "concavity certification", ac7(solved)),
        ("AC8", "gradient-norm inequality at minimizers", ac8()),
    ];
    let mut failed = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("[PASS] {id} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
