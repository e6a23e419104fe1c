//! Batch experiment runner behind the `macont` binary.
//!
//! Every subcommand reads a TOML [`ExperimentConfig`], writes its artifacts to
//! the configured output directory and maps the outcome to an exit code:
//! 0 success, 2 guard violation or failed verification, 3 solver failure,
//! 4 configuration or input error. A `run_summary.json` is written before
//! exiting whenever the output directory is known.

pub mod artifacts;
pub mod config;
mod report;

pub use artifacts::{heatmap_svg, RunSummary, Status, SCHEMA, SUMMARY_FILE};
pub use config::{apply_override, ExperimentConfig, Format, ManifoldBlock, OtMethod};
pub use report::render_report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use crate::estimates::{
    bbbb_gradient_bound, bbbb_proof_constant, cl1_torus_check, guard_check_raw, ConstantsLedger, SplitOutcome,
};
use crate::fields::path_density;
use crate::solver::{continuity_solve, solve_at_t, ContinuityRun, PathState};
use crate::transport::{pushforward_error, TransportProblem};
use crate::wasserstein::{atoms_from_density, exact_ot, sinkhorn, CostExponent, MAX_ATOMS};
use crate::{Error, Result};
use artifacts::{write_fields_csv, write_trace_csv, GridInfo, WassersteinSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_GUARD: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "macont", version, about = "Continuity-method Monge-Ampere experiments on flat tori")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (TOML).
    pub config: PathBuf,
    /// Override a config key, e.g. `--set solver.newton_tol=1e-9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// March the continuity path from μ to ν.
    Solve(RunArgs),
    /// Exact (or entropic) W₁ and W₂ between μ and ν.
    Wasserstein(RunArgs),
    /// Numerical checks of the estimate machinery.
    Verify {
        mode: VerifyMode,
        #[command(flatten)]
        run: RunArgs,
        /// `guard` only: classify this Λ_max instead of solving.
        #[arg(long)]
        lambda: Option<f64>,
        /// `guard` only: gradient norm for the synthetic state.
        #[arg(long, default_value_t = 0.0)]
        grad: f64,
    },
    /// Run every `sweep.variants` entry in parallel.
    Sweep(RunArgs),
    /// Summarize a finished run directory.
    Report { run_dir: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VerifyMode {
    Split,
    Bbbb,
    Cl1,
    Guard,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::GuardViolated { .. } => EXIT_GUARD,
        Error::Config(_)
        | Error::MissingArtifacts(_)
        | Error::InvalidGrid(_)
        | Error::GridMismatch
        | Error::UnsupportedManifold(_)
        | Error::ChartEquivalence { .. }
        | Error::NotNormalized { .. }
        | Error::SizeExceeded { .. }
        | Error::InfeasibleMass { .. }
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

fn status_for(code: i32) -> Status {
    match code {
        EXIT_OK => Status::Completed,
        EXIT_GUARD => Status::GuardViolated,
        EXIT_SOLVER => Status::SolverFailed,
        _ => Status::ConfigError,
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    run(cli)
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Report { run_dir } => match RunSummary::read(&run_dir) {
            Ok(s) => {
                use std::io::Write;
                let _ = std::io::stdout().lock().write_all(render_report(&s).as_bytes());
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Command::Solve(args) => with_config(&args, "solve", cmd_solve),
        Command::Wasserstein(args) => with_config(&args, "wasserstein", cmd_wasserstein),
        Command::Verify { mode, run, lambda, grad } => {
            let name = format!("verify {}", format!("{mode:?}").to_lowercase());
            with_config(&run, &name, |cfg, s| match mode {
                VerifyMode::Split => verify_split(cfg, s),
                VerifyMode::Bbbb => verify_bbbb(cfg, s),
                VerifyMode::Cl1 => verify_cl1(cfg, s),
                VerifyMode::Guard => verify_guard(cfg, s, lambda, grad),
            })
        }
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config, &args.set)?;
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

/// Loads the config, runs `body`, writes the summary and reports the outcome.
fn with_config(args: &RunArgs, name: &str, body: impl FnOnce(&ExperimentConfig, &mut RunSummary) -> Result<i32>) -> i32 {
    let cfg = match load(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    execute(&cfg, name, body)
}

fn execute(cfg: &ExperimentConfig, name: &str, body: impl FnOnce(&ExperimentConfig, &mut RunSummary) -> Result<i32>) -> i32 {
    let mut summary = RunSummary::new(name, cfg);
    let code = match body(cfg, &mut summary) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            summary.error = Some(e.to_string());
            exit_code(&e)
        }
    };
    summary.exit_code = code;
    summary.status = if code == EXIT_GUARD && name.starts_with("verify") && name != "verify guard" {
        Status::VerificationFailed
    } else {
        status_for(code)
    };
    if let Err(e) = summary.write(&cfg.output.dir) {
        eprintln!("error: cannot write {}: {e}", cfg.output.dir.display());
        return EXIT_CONFIG;
    }
    code
}

struct Setup {
    problem: TransportProblem,
    ledger: ConstantsLedger,
}

fn setup(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<Setup> {
    let grid = cfg.grid()?;
    summary.grid = Some(GridInfo::of(&grid));
    let (mu, nu) = cfg.densities(&grid)?;
    let ledger = ConstantsLedger::assemble_for(grid.manifold(), &mu, &nu, &cfg.ledger.inputs()?)?;
    summary.ledger = Some(ledger.clone());
    let problem = TransportProblem::new(mu, nu)?;
    Ok(Setup { problem, ledger })
}

fn timed<T>(summary: &mut RunSummary, key: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    summary.timings_ms.insert(key.to_string(), start.elapsed().as_secs_f64() * 1e3);
    out
}

fn write_run_artifacts(cfg: &ExperimentConfig, run: &ContinuityRun) -> Result<()> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    if cfg.output.wants(Format::Csv) {
        write_trace_csv(&dir.join("trace.csv"), &run.trace)?;
    }
    if let Some(last) = run.trace.last() {
        let lambda = if cfg.output.wants(Format::Csv) { Some(write_fields_csv(dir, last)?) } else { None };
        let grid = last.u.grid();
        if cfg.output.wants(Format::Svg) && grid.dim() == 2 {
            let lambda = match lambda {
                Some(l) => l,
                None => artifacts::lambda_values(last)?,
            };
            let title = format!("Λ at t = {}", last.t);
            std::fs::write(dir.join("heatmap.svg"), heatmap_svg(grid, &lambda, &title)?)?;
        }
    }
    Ok(())
}

/// Marches the path, records the outcome and returns the run when one exists.
fn march(cfg: &ExperimentConfig, s: &Setup, summary: &mut RunSummary) -> (i32, Option<ContinuityRun>) {
    let result = timed(summary, "solve", || continuity_solve(&s.problem, &cfg.solver, &s.ledger));
    let (code, run) = match result {
        Ok(run) => (EXIT_OK, Some(run)),
        Err(Error::GuardViolated { report, partial }) => {
            summary.error = Some(format!("guard violated at t = {}: Λ_max = {} ({})", report.t, report.lambda_max, report.verdict.label()));
            (EXIT_GUARD, Some(*partial))
        }
        Err(Error::StepUnderflow { t, dt, partial }) => {
            summary.error = Some(format!("step size underflow at t = {t}: Δt = {dt:e}"));
            (EXIT_SOLVER, Some(*partial))
        }
        Err(e) => {
            summary.error = Some(e.to_string());
            (exit_code(&e), None)
        }
    };
    if let Some(run) = &run {
        summary.record_run(run);
        if let Err(e) = write_run_artifacts(cfg, run) {
            summary.error.get_or_insert(e.to_string());
        }
    }
    if let Some(e) = &summary.error {
        eprintln!("error: {e}");
    }
    (code, run)
}

fn cmd_solve(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<i32> {
    let s = setup(cfg, summary)?;
    let (code, run) = march(cfg, &s, summary);
    if let Some(last) = run.as_ref().and_then(|r| r.final_state()).filter(|st| st.t == 1.0) {
        match timed(summary, "pushforward", || pushforward_error(&s.problem, &last.u, 1.0)) {
            Ok(rep) => summary.pushforward = Some(rep),
            Err(e) => eprintln!("warning: pushforward check skipped: {e}"),
        }
    }
    if cfg.output.wasserstein {
        let w = timed(summary, "wasserstein", || wasserstein_summary(cfg, &s.problem, false));
        summary.wasserstein = Some(w?);
    }
    Ok(code)
}

fn wasserstein_summary(cfg: &ExperimentConfig, problem: &TransportProblem, with_path: bool) -> Result<WassersteinSummary> {
    let grid = problem.grid();
    let (mu, nu) = (atoms_from_density(problem.mu()), atoms_from_density(problem.nu()));
    let m = grid.manifold();
    let path_times: &[f64] = if with_path { &cfg.wasserstein.path_times } else { &[] };
    match cfg.wasserstein.method {
        OtMethod::Exact => {
            if grid.len() > MAX_ATOMS {
                return Ok(WassersteinSummary {
                    method: "exact".into(),
                    exact: true,
                    w1: None,
                    w2: None,
                    path: Vec::new(),
                    note: Some(format!("skipped: {} atoms exceed the exact cap {MAX_ATOMS}", grid.len())),
                });
            }
            let w2 = exact_ot(m, &mu, &nu, CostExponent::Two)?.total_cost.max(0.0).sqrt();
            let w1 = exact_ot(m, &mu, &nu, CostExponent::One)?.total_cost.max(0.0);
            let path = path_times
                .iter()
                .map(|&t| {
                    let rho = atoms_from_density(&path_density(problem.mu(), problem.nu(), t)?);
                    Ok((t, exact_ot(m, &mu, &rho, CostExponent::Two)?.total_cost.max(0.0).sqrt()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(WassersteinSummary { method: "exact".into(), exact: true, w1: Some(w1), w2: Some(w2), path, note: None })
        }
        OtMethod::Sinkhorn => {
            let eps = cfg.wasserstein.epsilon * m.diameter().powi(2);
            let run = |a: &[crate::wasserstein::Atom], b: &[crate::wasserstein::Atom], p: CostExponent, e: f64| {
                sinkhorn(m, a, b, p, e, cfg.wasserstein.max_iter)
            };
            let r2 = run(&mu, &nu, CostExponent::Two, eps)?;
            let r1 = run(&mu, &nu, CostExponent::One, cfg.wasserstein.epsilon * m.diameter())?;
            let path = path_times
                .iter()
                .map(|&t| {
                    let rho = atoms_from_density(&path_density(problem.mu(), problem.nu(), t)?);
                    Ok((t, run(&mu, &rho, CostExponent::Two, eps)?.primal_cost.max(0.0).sqrt()))
                })
                .collect::<Result<Vec<_>>>()?;
            let converged = r1.converged && r2.converged;
            Ok(WassersteinSummary {
                method: "sinkhorn".into(),
                exact: false,
                w1: Some(r1.primal_cost.max(0.0)),
                w2: Some(r2.primal_cost.max(0.0).sqrt()),
                path,
                note: Some(format!(
                    "approximate: entropic primal cost at ε = {eps:.3e}{}",
                    if converged { "" } else { ", iteration limit reached" }
                )),
            })
        }
    }
}

fn cmd_wasserstein(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<i32> {
    let s = setup(cfg, summary)?;
    let w = timed(summary, "wasserstein", || wasserstein_summary(cfg, &s.problem, true))?;
    print_json(&serde_json::to_value(&w)?)?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    std::fs::write(cfg.output.dir.join("wasserstein.json"), serde_json::to_string_pretty(&w)? + "\n")?;
    summary.wasserstein = Some(w);
    Ok(EXIT_OK)
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn print_json(value: &serde_json::Value) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value)? + "\n";
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit(cfg: &ExperimentConfig, summary: &mut RunSummary, file: &str, payload: serde_json::Value) -> Result<()> {
    print_json(&payload)?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    std::fs::write(cfg.output.dir.join(file), serde_json::to_string_pretty(&payload)? + "\n")?;
    summary.verify = Some(payload);
    Ok(())
}

fn verify_split(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<i32> {
    let s = setup(cfg, summary)?;
    let l = &s.ledger;
    let (a, b, tangency) = match l.split {
        SplitOutcome::Split { a, b } => (Some(a), Some(b), None),
        SplitOutcome::NoSplit { tangency_delta0 } => (None, None, Some(tangency_delta0)),
    };
    let payload = json!({
        "n": l.n(),
        "degree": l.exponents.dichotomy,
        "c1": l.c1,
        "c2": l.c2,
        "c12_mode": l.c12_mode,
        "delta0": l.delta0,
        "delta0_auto": l.delta0_auto,
        "delta0_max": l.delta0_max,
        "split": l.split,
        "a": a,
        "b": b,
        "tangency_delta0": tangency,
        "c3": l.c3,
        "brackets_c3": l.split_brackets_c3(),
    });
    emit(cfg, summary, "verify_split.json", payload)?;
    Ok(EXIT_OK)
}

fn verify_bbbb(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<i32> {
    let s = setup(cfg, summary)?;
    let (code, run) = march(cfg, &s, summary);
    let Some(run) = run else { return Ok(code) };
    let a = s.ledger.semiconvexity;
    let n = s.ledger.n();
    let proof = bbbb_proof_constant(a, n, s.problem.mu().min_density());
    let mut rows = Vec::new();
    let mut fired = false;
    for st in &run.trace {
        match bbbb_gradient_bound(&st.u, a, s.problem.mu()) {
            Ok(obs) => {
                let within_fit = s.ledger.bbbb_c.map(|c| obs.ratio <= c);
                fired |= within_fit == Some(false);
                rows.push(json!({
                    "t": st.t, "b": obs.b, "l2_sq": obs.l2_sq, "ratio": obs.ratio,
                    "small_gradient_regime": obs.b < a, "within_proof_constant": obs.ratio <= proof,
                    "within_fit": within_fit,
                }));
            }
            Err(e) => {
                fired = true;
                rows.push(json!({ "t": st.t, "error": e.to_string() }));
            }
        }
    }
    let observed = crate::estimates::fit_constant(
        &rows.iter().filter_map(|r| r.get("ratio").and_then(|v| v.as_f64())).collect::<Vec<_>>(),
    );
    let payload = json!({
        "semiconvexity": a,
        "proof_constant": proof,
        "fit_constant": s.ledger.bbbb_c,
        "fit_source": if s.ledger.bbbb_c.is_some() { "ledger" } else { "calibrated from this trace" },
        "observed_max_ratio": observed,
        "fired": fired,
        "states": rows,
    });
    emit(cfg, summary, "verify_bbbb.json", payload)?;
    Ok(if code != EXIT_OK { code } else if fired { EXIT_GUARD } else { EXIT_OK })
}

fn state_at(problem: &TransportProblem, run: &ContinuityRun, t: f64, cfg: &ExperimentConfig) -> Result<PathState> {
    let start = run
        .trace
        .iter()
        .rev()
        .find(|st| st.t <= t)
        .ok_or_else(|| Error::Config(format!("no accepted state at or before t = {t}")))?;
    if start.t == t {
        return Ok(start.clone());
    }
    solve_at_t(problem, &start.u, t, &cfg.solver)
}

fn verify_cl1(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<i32> {
    let s = setup(cfg, summary)?;
    let (code, run) = march(cfg, &s, summary);
    let Some(run) = run else { return Ok(code) };
    let t = cfg.verify.cl1_t;
    let state = state_at(&s.problem, &run, t, cfg)?;
    let rep = cl1_torus_check(&s.problem, &state.u, t, &s.ledger)?;
    let fails = rep.preconditions_met() && rep.margin < 0.0;
    emit(cfg, summary, "verify_cl1.json", json!({ "t": t, "report": rep, "inequality_fails": fails }))?;
    Ok(if code != EXIT_OK { code } else if fails { EXIT_GUARD } else { EXIT_OK })
}

fn verify_guard(cfg: &ExperimentConfig, summary: &mut RunSummary, lambda: Option<f64>, grad: f64) -> Result<i32> {
    let s = setup(cfg, summary)?;
    if let Some(lambda) = lambda {
        let verdict = guard_check_raw(lambda, grad, &s.ledger);
        let failed = verdict.is_failure();
        let (a, b) = s.ledger.split_roots().map_or((None, None), |(a, b)| (Some(a), Some(b)));
        let payload = json!({
            "synthetic": true, "lambda_max": lambda, "grad_max": grad, "verdict": verdict,
            "a": a, "b": b, "c3": s.ledger.c3, "delta0": s.ledger.delta0,
        });
        emit(cfg, summary, "verify_guard.json", payload)?;
        return Ok(if failed { EXIT_GUARD } else { EXIT_OK });
    }
    let (code, run) = march(cfg, &s, summary);
    if let Some(run) = run {
        emit(cfg, summary, "verify_guard.json", json!({ "synthetic": false, "reports": run.reports }))?;
    }
    Ok(code)
}

fn cmd_sweep(args: &RunArgs) -> i32 {
    let base = match load(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if base.sweep.variants.is_empty() {
        eprintln!("error: configuration error: sweep.variants is empty");
        return EXIT_CONFIG;
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let config_dir = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = base.output.dir.clone();
    let jobs = |(i, variant): (usize, &Vec<String>)| -> (usize, String, i32, Option<RunSummary>) {
        let label = variant.join(" ");
        let overrides: Vec<String> = args.set.iter().chain(variant).cloned().collect();
        let dir = out.join(format!("variant_{i:03}"));
        match ExperimentConfig::from_toml(&text, &overrides, &config_dir) {
            Ok(mut cfg) => {
                cfg.output.dir = dir.clone();
                let code = execute(&cfg, "solve", cmd_solve);
                (i, label, code, RunSummary::read(&dir).ok())
            }
            Err(e) => {
                eprintln!("variant {i}: {e}");
                (i, label, exit_code(&e), None)
            }
        }
    };
    let results: Vec<_> = match rayon::ThreadPoolBuilder::new().num_threads(base.sweep.workers.unwrap_or(0)).build() {
        Ok(pool) => pool.install(|| base.sweep.variants.par_iter().enumerate().map(jobs).collect()),
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
    };
    if let Err(e) = write_sweep_csv(&out, &results) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    results.iter().map(|r| r.2).max().unwrap_or(EXIT_OK)
}

fn write_sweep_csv(out: &Path, results: &[(usize, String, i32, Option<RunSummary>)]) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    w.write_record(["variant", "overrides", "exit_code", "states", "lambda_max", "grad_max", "final_residual", "certificate", "w2"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for (i, label, code, summary) in results {
        let trace = summary.as_ref().and_then(|s| s.trace.as_ref());
        let cert = summary.as_ref().and_then(|s| s.certificate.as_ref()).map(|c| c.issued);
        let w2 = summary.as_ref().and_then(|s| s.wasserstein.as_ref()).and_then(|w| w.w2);
        w.write_record([
            i.to_string(),
            label.clone(),
            code.to_string(),
            trace.map_or(String::new(), |t| t.states.to_string()),
            opt(trace.map(|t| t.lambda_max)),
            opt(trace.map(|t| t.grad_max)),
            opt(trace.map(|t| t.final_residual)),
            cert.map_or(String::new(), |c| c.to_string()),
            opt(w2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
