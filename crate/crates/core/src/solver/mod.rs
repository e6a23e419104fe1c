//! Continuity march `t: 0 → 1` with damped Newton iterations on
//! `F(u, t) = 0`.
//!
//! The residual is gauged as `F̃ = F - log ∫e^F dμ`, so `F̃` lies in
//! `{h : ∫e^h dμ = 1}` and the discrete system is square on mean-zero
//! potentials. Each Newton step solves `dF̃(z) = -F̃` with the right-hand side
//! projected onto the tangent space `{h : ∫h e^F dμ = 0}`.

mod krylov;
mod operator;
mod precond;

pub use krylov::{gmres, pcg, KrylovOutcome};
pub use operator::{apply_linearization, divergence_form_apply, linearized_apply};
pub use precond::LaplacePreconditioner;

use serde::{Deserialize, Serialize};

use crate::estimates::{guard_check, lambda_field, ConstantsLedger, DichotomyReport, GuardVerdict};
use crate::fields::{mean_zero_project, Potential};
use crate::linalg::{Mat3, Vec3};
use crate::transport::{assemble, Assembly, TransportProblem};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Accept a state once `‖F̃‖_∞` is at most this.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_grow: f64,
    pub dt_shrink: f64,
    /// Grow `Δt` after a solve needing at most this many iterations.
    pub grow_after: usize,
    /// Sufficient-decrease factor in `‖F̃(u + αz)‖ ≤ (1 - cα)‖F̃(u)‖`.
    pub armijo: f64,
    /// Smallest damping factor tried before giving up.
    pub min_damping: f64,
    /// Reject iterates whose `w` has a smaller eigenvalue.
    pub min_eig_w: f64,
    /// Relative residual of the linear solves.
    pub linear_tol: f64,
    /// Conjugate-gradient iterations tried before the GMRES fallback.
    pub pcg_iters: usize,
    pub gmres_restart: usize,
    pub max_linear: usize,
    /// Abort the march when the guard reports a violation.
    pub enforce_guard: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton: 12,
            dt_init: 0.25,
            dt_min: 1e-6,
            dt_grow: 2.0,
            dt_shrink: 0.5,
            grow_after: 3,
            armijo: 0.1,
            min_damping: 1.0 / 1024.0,
            min_eig_w: 1e-8,
            linear_tol: 1e-10,
            pcg_iters: 40,
            gmres_restart: 50,
            max_linear: 800,
            enforce_guard: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("newton_tol", self.newton_tol),
            ("dt_min", self.dt_min),
            ("min_damping", self.min_damping),
            ("min_eig_w", self.min_eig_w),
            ("linear_tol", self.linear_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("solver.{name} = {v} must be positive")));
            }
        }
        if !(self.dt_init > 0.0 && self.dt_init <= 1.0) {
            return Err(Error::Config(format!("solver.dt_init = {} must lie in (0, 1]", self.dt_init)));
        }
        if self.dt_min > self.dt_init {
            return Err(Error::Config("solver.dt_min exceeds solver.dt_init".into()));
        }
        if !(self.dt_shrink > 0.0 && self.dt_shrink < 1.0) || !(self.dt_grow >= 1.0) {
            return Err(Error::Config("solver.dt_shrink must lie in (0, 1) and solver.dt_grow be at least 1".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) || self.min_damping > 1.0 {
            return Err(Error::Config("solver.armijo must lie in (0, 1) and solver.min_damping be at most 1".into()));
        }
        if self.max_newton == 0 || self.max_linear == 0 || self.gmres_restart == 0 {
            return Err(Error::Config("solver iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// One accepted (or best-effort) point of the path.
#[derive(Clone, Debug)]
pub struct PathState {
    pub t: f64,
    pub u: Potential,
    /// `‖F̃(u, t)‖_∞`.
    pub residual_inf: f64,
    /// `log ∫e^F dμ`, the constant removed by the gauge.
    pub gauge_shift: f64,
    /// `max |∇u|`.
    pub grad_max: f64,
    pub lambda_max: f64,
    pub lambda_argmax: usize,
    pub lambda_direction: Vec3,
    pub min_eig_w: f64,
    pub newton_iters: usize,
    pub linear_iters: usize,
    /// Linear solves that fell back from conjugate gradients to GMRES.
    pub gmres_fallbacks: usize,
    /// Step that reached this state.
    pub dt: f64,
    /// Step the march will try next.
    pub next_dt: f64,
    pub accepted: bool,
}

fn gauge(problem: &TransportProblem, asm: &Assembly) -> (Vec<f64>, f64) {
    let masses = problem.mu().masses();
    let f = asm.residual();
    let total: f64 = masses.iter().sum();
    let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = masses.iter().zip(&f).map(|(w, v)| w * (v - m).exp()).sum::<f64>() / total;
    let shift = m + s.ln();
    (f.iter().map(|v| v - shift).collect(), shift)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn make_state(problem: &TransportProblem, t: f64, u: Potential, asm: &Assembly, iters: (usize, usize, usize)) -> PathState {
    let (ft, shift) = gauge(problem, asm);
    let w: Vec<Mat3> = asm.points.iter().map(|p| p.w).collect();
    let lambda = lambda_field(problem.grid(), &w);
    PathState {
        t,
        u,
        residual_inf: sup(&ft),
        gauge_shift: shift,
        grad_max: asm.map.max_displacement(),
        lambda_max: lambda.max,
        lambda_argmax: lambda.argmax,
        lambda_direction: lambda.direction,
        min_eig_w: asm.min_eig(),
        newton_iters: iters.0,
        linear_iters: iters.1,
        gmres_fallbacks: iters.2,
        dt: 0.0,
        next_dt: 0.0,
        accepted: false,
    }
}

/// Result of one Newton step.
pub struct NewtonStep {
    pub u: Potential,
    pub assembly: Assembly,
    pub residual_inf: f64,
    pub damping: f64,
    pub linear: KrylovOutcome,
    pub used_gmres: bool,
}

fn is_step_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NotCConvex { .. }
            | Error::DisplacementTooLarge { .. }
            | Error::CutLocusProximity { .. }
            | Error::VectorTooLong { .. }
    )
}

/// Solves the Newton correction `dF̃(z) = -F̃` for mean-zero `z`.
fn newton_direction(problem: &TransportProblem, asm: &Assembly, cfg: &SolverConfig) -> Result<(Vec<f64>, KrylovOutcome, bool)> {
    let grid = problem.grid();
    let masses = problem.mu().masses();
    let total: f64 = masses.iter().sum();
    let project = |v: &mut Vec<f64>| {
        let mean = masses.iter().zip(v.iter()).map(|(m, x)| m * x).sum::<f64>() / total;
        v.iter_mut().for_each(|x| *x -= mean);
    };
    let (ft, _) = gauge(problem, asm);
    let f = asm.residual();
    // Tangent-space projection of the right-hand side, weight e^F dμ.
    let weights: Vec<f64> = masses.iter().zip(&f).map(|(m, v)| m * v.exp()).collect();
    let wsum: f64 = weights.iter().sum();
    let c = weights.iter().zip(&ft).map(|(w, v)| w * v).sum::<f64>() / wsum;
    let mut rhs: Vec<f64> = ft.iter().map(|v| -(v - c)).collect();
    project(&mut rhs);

    let n = grid.dim() as f64;
    let scale = asm.points.iter().map(|p| (0..grid.dim()).map(|a| p.a[a][a]).sum::<f64>() / n).sum::<f64>()
        / asm.points.len() as f64;
    let pre = LaplacePreconditioner::new(grid, scale);
    let op = |z: &[f64]| {
        let mut v = apply_linearization(grid, asm, z);
        project(&mut v);
        v
    };
    let prec = |r: &[f64]| {
        let mut v = pre.apply(r);
        project(&mut v);
        v
    };
    // Conjugate gradients on the positive operator -B first.
    let neg_op = |z: &[f64]| op(z).into_iter().map(|v| -v).collect::<Vec<_>>();
    let neg_prec = |r: &[f64]| prec(r).into_iter().map(|v| -v).collect::<Vec<_>>();
    let neg_rhs: Vec<f64> = rhs.iter().map(|v| -v).collect();
    let mut z = vec![0.0; grid.len()];
    let first = pcg(neg_op, neg_prec, &neg_rhs, &mut z, cfg.linear_tol, cfg.pcg_iters.min(cfg.max_linear));
    if first.converged {
        return Ok((z, first, false));
    }
    if !first.relative_residual.is_finite() || first.relative_residual > 1.0 {
        z.iter_mut().for_each(|v| *v = 0.0);
    }
    let budget = cfg.max_linear.saturating_sub(first.iterations).max(1);
    let second = gmres(op, prec, &rhs, &mut z, cfg.linear_tol, cfg.gmres_restart, budget);
    let outcome = KrylovOutcome {
        iterations: first.iterations + second.iterations,
        relative_residual: second.relative_residual,
        converged: second.converged,
    };
    if !second.converged {
        return Err(Error::LinearSolveStalled { residual: second.relative_residual, iterations: outcome.iterations });
    }
    project(&mut z);
    Ok((z, outcome, true))
}

/// One damped Newton step from `(u, asm)`.
pub fn newton_step(problem: &TransportProblem, u: &Potential, asm: &Assembly, t: f64, cfg: &SolverConfig) -> Result<NewtonStep> {
    let (ft, _) = gauge(problem, asm);
    let r0 = sup(&ft);
    let (z, linear, used_gmres) = newton_direction(problem, asm, cfg)?;
    let mut alpha = 1.0;
    while alpha >= cfg.min_damping {
        let moved: Vec<f64> = u.values().iter().zip(&z).map(|(a, b)| a + alpha * b).collect();
        let cand = mean_zero_project(&Potential::new(u.grid().clone(), moved)?, problem.mu())?;
        match assemble(problem, &cand, t) {
            Ok(next) if next.min_eig() >= cfg.min_eig_w => {
                let r = sup(&gauge(problem, &next).0);
                if r <= (1.0 - cfg.armijo * alpha) * r0 {
                    return Ok(NewtonStep { u: cand, assembly: next, residual_inf: r, damping: alpha, linear, used_gmres });
                }
            }
            Ok(_) => {}
            Err(e) if is_step_failure(&e) => {}
            Err(e) => return Err(e),
        }
        alpha *= 0.5;
    }
    Err(Error::DampingFailed { alpha })
}

/// Newton iterations at fixed `t` from `u_init`.
pub fn solve_at_t(problem: &TransportProblem, u_init: &Potential, t: f64, cfg: &SolverConfig) -> Result<PathState> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::ParameterOutOfRange(format!("path parameter t = {t}")));
    }
    let mut u = mean_zero_project(u_init, problem.mu())?;
    let mut asm = assemble(problem, &u, t).map_err(|e| diverged(problem, t, 0, None, e.to_string()))?;
    let (mut iters, mut lin, mut fallbacks) = (0usize, 0usize, 0usize);
    let mut best = make_state(problem, t, u.clone(), &asm, (0, 0, 0));
    loop {
        let r = sup(&gauge(problem, &asm).0);
        if r <= cfg.newton_tol {
            let mut s = make_state(problem, t, u, &asm, (iters, lin, fallbacks));
            s.accepted = true;
            return Ok(s);
        }
        if iters >= cfg.max_newton {
            return Err(diverged(problem, t, iters, Some(best), format!("no convergence within {} iterations", cfg.max_newton)));
        }
        match newton_step(problem, &u, &asm, t, cfg) {
            Ok(step) => {
                iters += 1;
                lin += step.linear.iterations;
                fallbacks += step.used_gmres as usize;
                u = step.u;
                asm = step.assembly;
                if step.residual_inf < best.residual_inf {
                    best = make_state(problem, t, u.clone(), &asm, (iters, lin, fallbacks));
                }
            }
            Err(e) => return Err(diverged(problem, t, iters, Some(best), e.to_string())),
        }
    }
}

fn diverged(problem: &TransportProblem, t: f64, iterations: usize, best: Option<PathState>, reason: String) -> Error {
    let best = best.unwrap_or_else(|| PathState {
        t,
        u: Potential::zeros(problem.grid().clone()),
        residual_inf: f64::INFINITY,
        gauge_shift: f64::NAN,
        grad_max: f64::NAN,
        lambda_max: f64::NAN,
        lambda_argmax: 0,
        lambda_direction: [0.0; 3],
        min_eig_w: f64::NAN,
        newton_iters: iterations,
        linear_iters: 0,
        gmres_fallbacks: 0,
        dt: 0.0,
        next_dt: 0.0,
        accepted: false,
    });
    Error::NewtonDiverged { t, iterations, residual: best.residual_inf, reason, best: Box::new(best) }
}

/// Hessian-bound certificate `Λ_max ≤ C₃ + 1` for a completed march.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub issued: bool,
    /// `C₃ + 1`.
    pub bound: f64,
    pub lambda_max: f64,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct ContinuityRun {
    pub trace: Vec<PathState>,
    pub reports: Vec<DichotomyReport>,
    pub rejected_steps: usize,
    pub completed: bool,
    pub certificate: Certificate,
}

impl ContinuityRun {
    /// Largest `Λ_max` along the accepted trace.
    pub fn lambda_max(&self) -> f64 {
        self.trace.iter().map(|s| s.lambda_max).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn grad_max(&self) -> f64 {
        self.trace.iter().map(|s| s.grad_max).fold(0.0, f64::max)
    }

    pub fn final_state(&self) -> Option<&PathState> {
        self.trace.last()
    }
}

fn certificate(run: &ContinuityRun, ledger: &ConstantsLedger) -> Certificate {
    let bound = ledger.c3 + 1.0;
    let lambda_max = run.lambda_max();
    let unmet: Vec<&DichotomyReport> =
        run.reports.iter().filter(|r| matches!(r.verdict, GuardVerdict::PreconditionUnmet { .. })).collect();
    let (issued, reason) = if !run.completed {
        (false, "the march did not reach t = 1".to_string())
    } else if let Some(r) = unmet.first() {
        let GuardVerdict::PreconditionUnmet { reason } = &r.verdict else { unreachable!() };
        (false, format!("guard preconditions unmet at {} of {} states (first at t = {}): {reason}", unmet.len(), run.reports.len(), r.t))
    } else if run.reports.iter().any(|r| r.verdict.is_failure()) {
        (false, "guard violation along the trace".to_string())
    } else if lambda_max > bound {
        (false, format!("Λ_max = {lambda_max} exceeds C₃ + 1 = {bound}"))
    } else {
        (true, format!("Λ_max = {lambda_max} ≤ C₃ + 1 = {bound} with the gradient budget met at every state"))
    };
    Certificate { issued, bound, lambda_max, reason }
}

/// Marches `t` from 0 to 1, starting from `u = 0`.
pub fn continuity_solve(problem: &TransportProblem, cfg: &SolverConfig, ledger: &ConstantsLedger) -> Result<ContinuityRun> {
    cfg.validate()?;
    let zero = Potential::zeros(problem.grid().clone());
    let mut start = solve_at_t(problem, &zero, 0.0, cfg)?;
    // When u = 0 already solves the endpoint problem (μ = ν) the path is trivial.
    if let Ok(a) = assemble(problem, &zero, 1.0) {
        if sup(&gauge(problem, &a).0) <= cfg.newton_tol {
            let mut s = make_state(problem, 1.0, zero, &a, (0, 0, 0));
            s.accepted = true;
            s.dt = 1.0;
            s.next_dt = cfg.dt_init;
            return march(problem, cfg, ledger, s, true);
        }
    }
    start.next_dt = cfg.dt_init;
    march(problem, cfg, ledger, start, true)
}

/// Continues a march from an accepted state, using its `next_dt`.
pub fn resume(problem: &TransportProblem, cfg: &SolverConfig, ledger: &ConstantsLedger, state: PathState) -> Result<ContinuityRun> {
    cfg.validate()?;
    march(problem, cfg, ledger, state, false)
}

fn march(
    problem: &TransportProblem,
    cfg: &SolverConfig,
    ledger: &ConstantsLedger,
    first: PathState,
    record_first: bool,
) -> Result<ContinuityRun> {
    let mut run = ContinuityRun {
        trace: Vec::new(),
        reports: Vec::new(),
        rejected_steps: 0,
        completed: false,
        certificate: Certificate { issued: false, bound: ledger.c3 + 1.0, lambda_max: f64::NAN, reason: String::new() },
    };
    let mut dt = first.next_dt.max(cfg.dt_min);
    let mut current = first;
    if record_first {
        accept(&mut run, current.clone(), ledger, cfg)?;
    }
    while current.t < 1.0 {
        let t_try = (current.t + dt).min(1.0);
        match solve_at_t(problem, &current.u, t_try, cfg) {
            Ok(mut s) => {
                s.dt = t_try - current.t;
                if s.newton_iters <= cfg.grow_after {
                    dt = (dt * cfg.dt_grow).min(1.0);
                }
                s.next_dt = dt;
                accept(&mut run, s.clone(), ledger, cfg)?;
                current = s;
            }
            Err(Error::NewtonDiverged { .. }) => {
                run.rejected_steps += 1;
                dt *= cfg.dt_shrink;
                if dt < cfg.dt_min {
                    run.certificate = certificate(&run, ledger);
                    return Err(Error::StepUnderflow { t: current.t, dt, partial: Box::new(run) });
                }
            }
            Err(e) => return Err(e),
        }
    }
    run.completed = true;
    run.certificate = certificate(&run, ledger);
    Ok(run)
}

fn accept(run: &mut ContinuityRun, state: PathState, ledger: &ConstantsLedger, cfg: &SolverConfig) -> Result<()> {
    let report = guard_check(&state, ledger);
    let failed = report.verdict.is_failure();
    run.trace.push(state);
    run.reports.push(report.clone());
    if failed && cfg.enforce_guard {
        run.certificate = certificate(run, ledger);
        let partial = Box::new(run.clone());
        return Err(Error::GuardViolated { report: Box::new(report), partial });
    }
    Ok(())
}
