use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sphcc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphcc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Config on disk with a few fields replaced.
fn patched(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v = read_json(&config(name));
    edit(&mut v);
    let path = dir.join(format!("patched-{name}"));
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    path
}

fn solve(dir: &Path, cfg: &Path) -> PathBuf {
    let out = dir.join("u.csv");
    let run = sphcc(&["solve", "--config", s(cfg), "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    out
}

#[test]
fn manufactured_solve_converges_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve(dir.path(), &config("manufactured.json"));
    let log = read_json(&dir.path().join("u.csv.log.json"));
    assert!(log["converged"].as_bool().unwrap());
    assert!(log["residual"].as_f64().unwrap() <= 1e-10);
    let text = fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,theta,u"));
    // pole once, then 32 rings of 32 angles
    assert_eq!(lines.count(), 1 + 32 * 32);
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"mode\": \"semilinear-2d\", ").unwrap();
    let run = sphcc(&[
        "solve",
        "--config",
        s(&bad),
        "--out",
        s(&dir.path().join("u.csv")),
    ]);
    assert_eq!(code(&run), 2);
    assert!(String::from_utf8_lossy(&run.stderr).contains("parsing"));

    let unknown = patched(dir.path(), "manufactured.json", |v| {
        v["grid"]["Nphi"] = 3.into()
    });
    let run = sphcc(&[
        "solve",
        "--config",
        s(&unknown),
        "--out",
        s(&dir.path().join("u.csv")),
    ]);
    assert_eq!(code(&run), 2);

    let coarse = patched(dir.path(), "manufactured.json", |v| {
        v["grid"]["Nr"] = 4.into()
    });
    let run = sphcc(&[
        "solve",
        "--config",
        s(&coarse),
        "--out",
        s(&dir.path().join("u.csv")),
    ]);
    assert_eq!(code(&run), 2);
    assert!(!dir.path().join("u.csv").exists());
}

#[test]
fn single_newton_step_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = patched(dir.path(), "radial_exp.json", |v| v["max_iter"] = 1.into());
    let run = sphcc(&[
        "solve",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("u.csv")),
    ]);
    assert_eq!(code(&run), 3);
    assert!(String::from_utf8_lossy(&run.stderr).contains("did not converge"));
}

#[test]
fn manufactured_pipeline_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("manufactured.json");
    let field = solve(dir.path(), &cfg);
    let report = dir.path().join("report.json");
    let pairs = dir.path().join("pairs.csv");
    let run = sphcc(&[
        "verify",
        "--config",
        s(&cfg),
        "--solution",
        s(&field),
        "--report",
        s(&report),
        "--pairs",
        "5000",
        "--dump-pairs",
        s(&pairs),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let r = read_json(&report);
    assert_eq!(r["verdict"], "PASS");
    assert!(r["min_z"].as_f64().unwrap() >= -r["tolerance"].as_f64().unwrap());
    assert!(r["boundary_margin"].as_f64().unwrap() > 0.0);
    assert_eq!(r["num_pairs"], 5000);
    let dump = fs::read_to_string(pairs).unwrap();
    assert!(dump.starts_with("x0,x1,x2,y0,y1,y2,Z\n"));
    assert_eq!(dump.lines().count(), 5001);
}

#[test]
fn radial_pipeline_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = patched(dir.path(), "radial_exp.json", |v| {
        v["verification"]["num_pairs"] = 2000.into();
        v["grid"]["Nr"] = 32.into();
        v["grid"]["Ntheta"] = 16.into();
    });
    let field = solve(dir.path(), &cfg);
    assert_eq!(fs::read_to_string(&field).unwrap().lines().count(), 1 + 33);
    let run = sphcc(&["verify", "--config", s(&cfg), "--solution", s(&field)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let r: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(r["verdict"], "PASS");
}

/// `cos R - cos d`: zero on the boundary and convex, the wrong way round.
fn write_convex_field(path: &Path, nr: usize, ntheta: usize, radius: f64) {
    let mut text = String::from("r,theta,u\n");
    let mut row = |r: f64, t: f64| {
        text.push_str(&format!(
            "{r:.16e},{t:.16e},{:.16e}\n",
            radius.cos() - r.cos()
        ))
    };
    row(0.0, 0.0);
    for i in 1..=nr {
        let r = if i == nr {
            radius
        } else {
            i as f64 * radius / nr as f64
        };
        for j in 0..ntheta {
            row(r, j as f64 * 2.0 * PI / ntheta as f64);
        }
    }
    fs::write(path, text).unwrap();
}

#[test]
fn convex_field_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("convex.csv");
    write_convex_field(&field, 32, 32, PI / 3.0);
    let report = dir.path().join("report.json");
    let run = sphcc(&[
        "verify",
        "--config",
        s(&config("manufactured.json")),
        "--solution",
        s(&field),
        "--report",
        s(&report),
        "--pairs",
        "2000",
    ]);
    assert_eq!(code(&run), 1, "{}", String::from_utf8_lossy(&run.stderr));
    let r = read_json(&report);
    assert_eq!(r["verdict"], "FAIL");
    assert!(r["min_z"].as_f64().unwrap() < -0.1);
}

#[test]
fn grid_mismatch_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("coarse.csv");
    write_convex_field(&field, 16, 32, PI / 3.0);
    let report = dir.path().join("report.json");
    let run = sphcc(&[
        "verify",
        "--config",
        s(&config("manufactured.json")),
        "--solution",
        s(&field),
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&run), 2);
    assert!(String::from_utf8_lossy(&run.stderr).contains("does not match"));
    assert!(!report.exists());

    fs::write(&field, "r,u\n0,1\n").unwrap();
    let run = sphcc(&[
        "verify",
        "--config",
        s(&config("manufactured.json")),
        "--solution",
        s(&field),
    ]);
    assert_eq!(code(&run), 2);
}

#[test]
fn lemma_suites_exit_codes() {
    let ok = sphcc(&[
        "check-lemmas",
        "--speed",
        "0.7",
        "--trials",
        "40",
        "--ordering-trials",
        "200",
    ]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let r: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(r["passed"], true);

    let conjugate = sphcc(&["check-lemmas", "--speed", "1.57"]);
    assert_eq!(code(&conjugate), 3);
    assert!(String::from_utf8_lossy(&conjugate.stderr).contains("conjugate"));

    assert_eq!(code(&sphcc(&["check-lemmas", "--speed", "-0.1"])), 2);
    assert_eq!(code(&sphcc(&["check-lemmas", "--fd-step", "0"])), 2);
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let path = dir.path().join(name);
        let out = sphcc(&[
            "check-lemmas",
            "--seed",
            seed,
            "--trials",
            "30",
            "--ordering-trials",
            "100",
            "--report",
            s(&path),
        ]);
        assert_eq!(code(&out), 0);
        fs::read(path).unwrap()
    };
    let a = run("11", "a.json");
    assert_eq!(a, run("11", "b.json"));
    assert_ne!(a, run("12", "c.json"));

    let cfg = config("manufactured.json");
    let field = solve(dir.path(), &cfg);
    let verify = |name: &str| {
        let path = dir.path().join(name);
        let out = sphcc(&[
            "verify",
            "--config",
            s(&cfg),
            "--solution",
            s(&field),
            "--pairs",
            "3000",
            "--seed",
            "4",
            "--report",
            s(&path),
        ]);
        assert_eq!(code(&out), 0);
        fs::read(path).unwrap()
    };
    assert_eq!(verify("v1.json"), verify("v2.json"));
}

#[test]
fn ordering_and_hypothesis_suites() {
    let run = sphcc(&["check-ordering", "--trials", "500", "--seed", "2"]);
    assert_eq!(code(&run), 0);
    let r: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(r["contraction"]["violations"], 0);
    assert_eq!(r["expansion"]["violations"], 0);

    let run = sphcc(&[
        "check-hypotheses",
        "--config",
        s(&config("radial_exp.json")),
        "--trials",
        "500",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));

    let dir = tempfile::tempdir().unwrap();
    let concave = patched(dir.path(), "radial_exp.json", |v| {
        v["operator"]["psi"] = serde_json::json!({ "kind": "neg_exp_neg" })
    });
    let run = sphcc(&[
        "check-hypotheses",
        "--config",
        s(&concave),
        "--trials",
        "500",
    ]);
    assert_eq!(code(&run), 1);
    let r: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(r["passed"], false);
}
