//! Both sides of the test-function inequality on a solved state, and the
//! cut-off η the argument localizes with.
//!
//! cargo run --example test_function_check

use std::f64::consts::TAU;
use std::sync::Arc;

use ma_continuity::estimates::{cl1_torus_check, korevaar_eta, ConstantsLedger, LedgerInputs};
use ma_continuity::fields::{density_from_spec, DensitySpec};
use ma_continuity::geometry::{Manifold, ManifoldGrid};
use ma_continuity::solver::{continuity_solve, SolverConfig};
use ma_continuity::transport::TransportProblem;

fn main() -> ma_continuity::Result<()> {
    let grid = Arc::new(ManifoldGrid::new(Manifold::torus(&[TAU]), &[256])?);
    let mu = density_from_spec(&grid, &DensitySpec::Uniform)?;
    let nu = density_from_spec(&grid, &DensitySpec::CosineBump { amplitude: 0.6, wavenumber: vec![2] })?;
    let problem = TransportProblem::new(mu, nu)?;
    // A δ₀ large enough for the gradient of this solution.
    let inputs = LedgerInputs { delta0: Some(1.0), ..Default::default() };
    let ledger = ConstantsLedger::assemble(&problem, &inputs)?;
    let run = continuity_solve(&problem, &SolverConfig::default(), &ledger)?;
    let state = run.final_state().unwrap();

    let rep = cl1_torus_check(&problem, &state.u, 1.0, &ledger)?;
    println!("max|∇u| = {:.4} (≤ δ₀: {}), w₁₁ = {:.4}, threshold {:.4}", rep.grad_max, rep.gradient_ok, rep.w11, rep.threshold);
    println!("w^ij η_ij: direct {:.6e}, from the equation {:.6e}", rep.lhs_direct, rep.lhs_equation);
    println!("right-hand side {:.6e}, margin {:.6e}", rep.rhs, rep.margin);
    println!("w^ij u_ki u_kj = {:.4} ≥ w₁₁ - 2n max D²c = {:.4}", rep.cf2, rep.cf2_lower);
    if !rep.note.is_empty() {
        println!("note: {}", rep.note);
    }

    let x0 = grid.point(state.lambda_argmax);
    let eta = korevaar_eta(&state.u, ledger.delta0, &x0);
    let support = eta.iter().filter(|e| **e > 0.0).count();
    println!("η peaks at {:.4} over {support} of {} cells", eta.iter().copied().fold(0.0, f64::max), grid.len());
    Ok(())
}
