//! End-to-end tests of the `macont` binary: exit codes, artifacts and
//! reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn macont(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macont")).args(args).output().expect("spawn macont")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("run_summary.json")).unwrap()).unwrap()
}

fn report(dir: &Path) -> String {
    let o = macont(&["report", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    String::from_utf8(o.stdout).unwrap()
}

/// `solve` on a config with extra overrides into `out`.
fn solve(cfg: &str, out: &Path, sets: &[&str]) -> Output {
    let cfg = config(cfg);
    let mut args = vec!["solve", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    for s in sets {
        args.extend(["--set", s]);
    }
    macont(&args)
}

const SMALL_BUMP: &[&str] = &["manifold.resolution=[16,16]", "output.wasserstein=false"];

#[test]
fn identity_solve_exits_zero_with_a_single_state() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve("identity.toml", dir.path(), &["manifold.resolution=[16,16]"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2, "header plus the t = 1 state:\n{trace}");
    assert!(trace.lines().nth(1).unwrap().starts_with("1,"));
    for f in ["fields.csv", "heatmap.svg", "run_summary.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let s = summary(dir.path());
    assert_eq!(s["status"], "completed");
    assert_eq!(s["certificate"]["issued"], true);
    assert!(report(dir.path()).lines().last().unwrap().starts_with("CERTIFICATE:"));
}

#[test]
fn solver_failure_exits_three_and_still_writes_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut sets = SMALL_BUMP.to_vec();
    sets.extend(["solver.max_newton=1", "solver.dt_min=0.2"]);
    let o = solve("bump_2d.toml", dir.path(), &sets);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("step size underflow"));
    assert_eq!(summary(dir.path())["status"], "solver_failed");
    assert!(report(dir.path()).lines().last().unwrap().starts_with("FAILED: step size underflow"));
}

#[test]
fn configuration_errors_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve("bump_2d.toml", dir.path(), &["solver.newton_tolerance=1e-8"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("newton_tolerance"), "{}", stderr(&o));

    let o = macont(&["solve", "/nonexistent/config.toml"]);
    assert_eq!(code(&o), 4);

    let o = macont(&["report", dir.path().join("never_ran").to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("run_summary.json"));

    let o = macont(&["frobnicate"]);
    assert_eq!(code(&o), 4);
    let o = macont(&["--help"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn synthetic_guard_violation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("near_identity_1d.toml");
    let (cfg, out) = (cfg.to_str().unwrap(), dir.path().to_str().unwrap());
    let o = macont(&["verify", "guard", cfg, "--out", out, "--lambda", "1e6"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"]["verdict"], "catastrophic", "{v}");
    assert_eq!(summary(dir.path())["status"], "guard_violated");

    let o = macont(&["verify", "guard", cfg, "--out", out, "--lambda", "4e4"]);
    assert_eq!(code(&o), 2);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"]["verdict"], "violated", "{v}");

    let o = macont(&["verify", "guard", cfg, "--out", out, "--lambda", "1.0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn failed_bbbb_verification_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("near_identity_1d.toml");
    let args = |c: &'static str| {
        vec!["verify", "bbbb", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--set", c]
    };
    let o = macont(&args("ledger.bbbb_c=1e-30"));
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert_eq!(summary(dir.path())["status"], "verification_failed");
    let o = macont(&args("ledger.bbbb_c=1.0"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn verify_split_matches_the_quadratic_roots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("split_n1.toml");
    let o = macont(&["verify", "split", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    // x/δ₀² = 1 + x² with δ₀ = 0.1: x² - 100x + 1 = 0.
    let disc = (100.0f64 * 100.0 - 4.0).sqrt();
    let (a, b) = ((100.0 - disc) / 2.0, (100.0 + disc) / 2.0);
    assert_eq!(v["degree"], 2);
    assert!((v["a"].as_f64().unwrap() - a).abs() <= 1e-12 * a, "{v}");
    assert!((v["b"].as_f64().unwrap() - b).abs() <= 1e-12 * b, "{v}");
    assert_eq!(v["brackets_c3"], false);
    let file: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify_split.json")).unwrap()).unwrap();
    assert_eq!(file, v);
}

#[test]
fn repeated_solves_are_byte_identical() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&d1, &d2] {
        let o = solve("bump_2d.toml", d.path(), SMALL_BUMP);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["trace.csv", "fields.csv", "heatmap.svg"] {
        let a = std::fs::read(d1.path().join(f)).unwrap();
        let b = std::fs::read(d2.path().join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
    assert_eq!(report(d1.path()), report(d2.path()));
}

#[test]
fn guard_warnings_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let sets = ["ledger.c12_mode=calibrated", "ledger.c1=1", "ledger.c2=1", "output.wasserstein=false"];
    let o = solve("near_identity_1d.toml", dir.path(), &sets);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(dir.path());
    assert!(r.contains("WARNING: Λ_max entered the band"), "{r}");
    assert!(r.lines().last().unwrap().starts_with("CERTIFICATE:"), "{r}");
}

#[test]
fn unmet_preconditions_deny_the_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve("bump_2d.toml", dir.path(), SMALL_BUMP);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(dir.path());
    assert!(r.contains("preconditions unmet"), "{r}");
    assert!(r.contains(", injective on the grid"), "{r}");
    let push = &summary(dir.path())["pushforward"];
    assert!(push["tv"].as_f64().unwrap() < 1e-2, "{push}");
    assert!(r.lines().last().unwrap().starts_with("NO CERTIFICATE:"), "{r}");
}

#[test]
fn wasserstein_command_reports_ordered_distances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("bump_2d.toml");
    let o = macont(&[
        "wasserstein",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "manifold.resolution=[12,12]",
        "--set",
        "wasserstein.path_times=[0.0,0.5,1.0]",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("wasserstein.json")).unwrap()).unwrap();
    let (w1, w2) = (v["w1"].as_f64().unwrap(), v["w2"].as_f64().unwrap());
    assert!(v["exact"].as_bool().unwrap());
    assert!(0.0 < w1 && w1 <= w2 + 1e-12, "{v}");
    let path: Vec<f64> = v["path"].as_array().unwrap().iter().map(|p| p[1].as_f64().unwrap()).collect();
    assert!(path[0].abs() < 1e-9);
    assert!((path[2] - w2).abs() < 1e-9);
    assert!(path[1] < path[2]);
}

#[test]
fn sweep_runs_every_variant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("sweep_amplitude.toml");
    let o = macont(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "manifold.resolution=[12,12]",
        "--set",
        "output.wasserstein=false",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rows = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let lambdas: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(lambdas.windows(2).all(|w| w[0] < w[1]), "Λ_max should grow with amplitude: {lambdas:?}");
    for i in 0..4 {
        assert!(dir.path().join(format!("variant_{i:03}")).join("run_summary.json").is_file());
    }
}
