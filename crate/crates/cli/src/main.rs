//! `sphcc`: solve isotropic elliptic problems on spherical caps, certify
//! concavity of the result and run the supporting lemma suites.
//!
//! Exit codes: 0 pass, 1 verdict fail, 2 usage/config/IO, 3 numerical failure.

mod io;

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sphere_concavity::config::{RunConfig, Solution};
use sphere_concavity::lemmas::{lemma_report, DEFAULT_K_STEP, ORDERING_TOL};
use sphere_concavity::operators::{check_b_hypotheses, check_f_hypotheses, HypothesisReport};
use sphere_concavity::solver::{GridInterpolant, SolveStats, SolverMode};
use sphere_concavity::spectral::{ordering_suite, MapKind, OrderingSuite};
use sphere_concavity::verify::{full_report, grid_tolerance, sample_pairs, Verdict};
use sphere_concavity::Error;

#[derive(Parser)]
#[command(
    name = "sphcc",
    version,
    about = "Concavity of solutions to isotropic elliptic PDEs on spherical caps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem and write the field CSV plus a solve log.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Field CSV (`r,theta,u`).
        #[arg(long)]
        out: PathBuf,
        /// Solve log JSON; defaults to `<out>.log.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Certify concavity of a solved field.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Field CSV written by `solve`.
        #[arg(long)]
        solution: PathBuf,
        /// Report JSON; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Overrides `verification.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `verification.num_pairs`.
        #[arg(long)]
        pairs: Option<usize>,
        /// Also dump the random pairs as `x0,x1,x2,y0,y1,y2,Z`.
        #[arg(long)]
        dump_pairs: Option<PathBuf>,
    },
    /// Jacobi closed form, endpoint variations and spectral ordering at one speed.
    CheckLemmas {
        #[arg(long, default_value_t = 0.7)]
        speed: f64,
        /// Second-difference step for the variation checks.
        #[arg(long, default_value_t = DEFAULT_K_STEP)]
        fd_step: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1000)]
        ordering_trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Spectral ordering under random contractions and expansions.
    CheckOrdering {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Sampled structural hypotheses on the configured operator and right-hand side.
    CheckHypotheses {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `verification.hypothesis_trials`.
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report JSON; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// A failed command together with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    fn numeric(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 3,
            error: error.into(),
        }
    }
}

/// Input errors are usage failures; anything raised while computing is numerical.
fn classify(e: Error) -> Failure {
    match e {
        Error::Domain { .. }
        | Error::Precondition(_)
        | Error::GridTooCoarse { .. }
        | Error::DimensionMismatch { .. }
        | Error::DegenerateVector { .. } => Failure::usage(e),
        _ => Failure::numeric(e),
    }
}

type Outcome = std::result::Result<Verdict, Failure>;

fn verdict(passed: bool) -> Verdict {
    if passed {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn load_config(path: &Path) -> std::result::Result<RunConfig, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::usage)?;
    let config = RunConfig::from_json(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::usage)?;
    config
        .validate()
        .with_context(|| format!("invalid config {}", path.display()))
        .map_err(Failure::usage)?;
    Ok(config)
}

#[derive(Serialize)]
struct SolveLog {
    mode: SolverMode,
    nr: usize,
    ntheta: usize,
    tol: f64,
    max_iter: usize,
    converged: bool,
    #[serde(flatten)]
    stats: SolveStats,
}

fn default_log_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".log.json");
    out.with_file_name(name)
}

fn cmd_solve(config: &Path, out: &Path, report: Option<&Path>) -> Outcome {
    let config = load_config(config)?;
    let (solution, stats) = config.solve().map_err(classify)?;
    let csv = match &solution {
        Solution::Grid(g) => io::grid_csv(g),
        Solution::Radial(r) => io::radial_csv(r),
    }
    .map_err(Failure::usage)?;
    let log = SolveLog {
        mode: config.mode,
        nr: config.grid.nr,
        ntheta: config.grid.ntheta,
        tol: config.tol,
        max_iter: config.max_iter,
        converged: true,
        stats,
    };
    eprintln!(
        "[solve] converged in {} iterations, residual {:.3e}",
        log.stats.iterations, log.stats.residual
    );
    io::write_atomic(out, &csv).map_err(Failure::usage)?;
    let log_path = report
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_log_path(out));
    io::emit_json(&log, Some(&log_path)).map_err(Failure::usage)?;
    Ok(Verdict::Pass)
}

fn cmd_verify(
    config: &Path,
    solution: &Path,
    report: Option<&Path>,
    seed: Option<u64>,
    pairs: Option<usize>,
    dump: Option<&Path>,
) -> Outcome {
    let mut config = load_config(config)?;
    if let Some(s) = seed {
        config.verification.seed = s;
    }
    if let Some(n) = pairs {
        config.verification.num_pairs = n;
    }
    config.verification.validate().map_err(Failure::usage)?;
    let grid = config.polar_grid().map_err(Failure::usage)?;
    let cap = config.cap().map_err(Failure::usage)?;
    let rows = io::read_rows(solution).map_err(Failure::usage)?;
    let field = match config.mode {
        SolverMode::Semilinear2d => io::grid_from_rows(&rows, grid),
        SolverMode::RadialFullyNonlinear1d => io::radial_from_rows(&rows, grid)
            .and_then(|r| r.to_grid(grid.ntheta()).map_err(anyhow::Error::from)),
    }
    .with_context(|| format!("{} does not match the configured grid", solution.display()))
    .map_err(Failure::usage)?;
    let u = GridInterpolant::new(field, cap.clone()).map_err(classify)?;
    let tolerance = grid_tolerance(&grid, &cap).map_err(Failure::numeric)?;
    let report_data = full_report(
        &config.operator,
        &config.rhs,
        &cap,
        &u,
        &config.verification,
        tolerance,
    )
    .map_err(Failure::numeric)?;
    if let Some(path) = dump {
        let samples = sample_pairs(
            &u,
            &cap,
            config.verification.num_pairs,
            config.verification.seed,
        )
        .map_err(Failure::numeric)?;
        let bytes = io::pairs_csv(&samples).map_err(Failure::usage)?;
        io::write_atomic(path, &bytes).map_err(Failure::usage)?;
    }
    eprintln!(
        "[verify] min Z {:.3e} (tolerance {:.3e}), boundary margin {:.3e}, verdict {:?}",
        report_data.min_z, report_data.tolerance, report_data.boundary_margin, report_data.verdict
    );
    for f in &report_data.failures {
        eprintln!("[verify] failed: {f}");
    }
    io::emit_json(&report_data, report).map_err(Failure::usage)?;
    Ok(report_data.verdict)
}

fn cmd_check_lemmas(
    speed: f64,
    fd_step: f64,
    trials: usize,
    ordering_trials: usize,
    common: &Common,
) -> Outcome {
    if !(speed > 0.0 && speed < FRAC_PI_2) {
        return Err(Failure::usage(anyhow!(
            "--speed must lie in (0, pi/2), got {speed}"
        )));
    }
    if !(fd_step > 0.0 && fd_step < 0.1) {
        return Err(Failure::usage(anyhow!(
            "--fd-step must lie in (0, 0.1), got {fd_step}"
        )));
    }
    if trials == 0 || ordering_trials == 0 {
        return Err(Failure::usage(anyhow!("trial counts must be positive")));
    }
    let report = lemma_report(speed, fd_step, trials, ordering_trials, common.seed)
        .map_err(Failure::numeric)?;
    eprintln!(
        "[check-lemmas] jacobi {:.3e}, K1 {:.3e}, Ev-K {:.3e}, ordering violations {}/{}",
        report.jacobi.max_deviation,
        report.k.k1_sup,
        report.k.ev_k_residual,
        report.contraction.violations,
        report.expansion.violations
    );
    io::emit_json(&report, common.report.as_deref()).map_err(Failure::usage)?;
    Ok(verdict(report.passed))
}

#[derive(Serialize)]
struct OrderingReport {
    seed: u64,
    trials: usize,
    contraction: OrderingSuite,
    expansion: OrderingSuite,
    passed: bool,
}

fn cmd_check_ordering(trials: usize, common: &Common) -> Outcome {
    if trials == 0 {
        return Err(Failure::usage(anyhow!("--trials must be positive")));
    }
    let suite =
        |kind| ordering_suite(kind, trials, common.seed, ORDERING_TOL).map_err(Failure::numeric);
    let contraction = suite(MapKind::Contraction)?;
    let expansion = suite(MapKind::Expansion)?;
    let report = OrderingReport {
        seed: common.seed,
        trials,
        passed: contraction.violations == 0 && expansion.violations == 0,
        contraction,
        expansion,
    };
    eprintln!(
        "[check-ordering] violations {}/{} over {trials} trials each",
        report.contraction.violations, report.expansion.violations
    );
    io::emit_json(&report, common.report.as_deref()).map_err(Failure::usage)?;
    Ok(verdict(report.passed))
}

#[derive(Serialize)]
struct HypothesesReport {
    f: HypothesisReport,
    b: HypothesisReport,
    passed: bool,
}

fn cmd_check_hypotheses(config: &Path, trials: Option<usize>, common: &Common) -> Outcome {
    let config = load_config(config)?;
    let trials = trials.unwrap_or(config.verification.hypothesis_trials);
    if trials == 0 {
        return Err(Failure::usage(anyhow!("--trials must be positive")));
    }
    let cap = config.cap().map_err(Failure::usage)?;
    let f = check_f_hypotheses(&config.operator, trials, common.seed).map_err(classify)?;
    let b = check_b_hypotheses(&config.rhs, &cap, trials, common.seed).map_err(classify)?;
    for check in f.checks.iter().chain(&b.checks).filter(|c| !c.passed) {
        eprintln!(
            "[check-hypotheses] {} violated by {:.3e}",
            check.name, check.worst_violation
        );
    }
    let report = HypothesesReport {
        passed: f.passed && b.passed,
        f,
        b,
    };
    io::emit_json(&report, common.report.as_deref()).map_err(Failure::usage)?;
    Ok(verdict(report.passed))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Solve {
            config,
            out,
            report,
        } => cmd_solve(&config, &out, report.as_deref()),
        Command::Verify {
            config,
            solution,
            report,
            seed,
            pairs,
            dump_pairs,
        } => cmd_verify(
            &config,
            &solution,
            report.as_deref(),
            seed,
            pairs,
            dump_pairs.as_deref(),
        ),
        Command::CheckLemmas {
            speed,
            fd_step,
            trials,
            ordering_trials,
            common,
        } => cmd_check_lemmas(speed, fd_step, trials, ordering_trials, &common),
        Command::CheckOrdering { trials, common } => cmd_check_ordering(trials, &common),
        Command::CheckHypotheses {
            config,
            trials,
            common,
        } => cmd_check_hypotheses(&config, trials, &common),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
