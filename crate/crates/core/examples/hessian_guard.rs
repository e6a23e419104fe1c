//! The Hessian guard along a real march and on synthetic values of Λ_max.
//! A tiny perturbation of the uniform measure on the circle stays within the
//! gradient budget, so the march ends with the certificate Λ_max ≤ C₃ + 1.
//!
//! cargo run --example hessian_guard

use std::f64::consts::TAU;
use std::sync::Arc;

use ma_continuity::estimates::{guard_check_raw, ConstantsLedger, LedgerInputs};
use ma_continuity::fields::{density_from_spec, DensitySpec};
use ma_continuity::geometry::{Manifold, ManifoldGrid};
use ma_continuity::solver::{continuity_solve, SolverConfig};
use ma_continuity::transport::TransportProblem;

fn main() -> ma_continuity::Result<()> {
    let grid = Arc::new(ManifoldGrid::new(Manifold::torus(&[TAU]), &[128])?);
    let mu = density_from_spec(&grid, &DensitySpec::Uniform)?;
    let nu = density_from_spec(&grid, &DensitySpec::CosineBump { amplitude: 1e-4, wavenumber: vec![1] })?;
    let problem = TransportProblem::new(mu, nu)?;
    let ledger = ConstantsLedger::assemble(&problem, &LedgerInputs::default())?;
    let (a, b) = ledger.split_roots().expect("auto δ₀ always splits");
    println!("δ₀ = {:.4e}, a = {a:.4e}, C₃ = {:.4e}, b = {b:.4e}", ledger.delta0, ledger.c3);

    let run = continuity_solve(&problem, &SolverConfig::default(), &ledger)?;
    for r in &run.reports {
        println!("t = {:.3}: Λ_max = {:.8}, max|∇u| = {:.3e} → {}", r.t, r.lambda_max, r.grad_max, r.verdict.label());
    }
    println!("certificate issued: {} ({})", run.certificate.issued, run.certificate.reason);

    println!("\nsynthetic states:");
    for lambda in [a / 2.0, 1.0, ledger.c3 + 0.5, 2.0 * b] {
        println!("  Λ_max = {lambda:.4e} → {}", guard_check_raw(lambda, 0.0, &ledger).label());
    }
    println!("  max|∇u| = 2δ₀ → {}", guard_check_raw(1.0, 2.0 * ledger.delta0, &ledger).label());
    Ok(())
}
