//! Fits the constants of `∫u² dμ ≤ C_k W₁^{1/2}` and `b^{n+4} ≤ C_b ‖u‖²`
//! over a seeded family of near-uniform targets, then turns them into the
//! W₂² budget δ that forces `max|∇u| ≤ δ₀`.
//!
//! cargo run --example gradient_squeeze

use std::f64::consts::TAU;
use std::sync::Arc;

use ma_continuity::estimates::{
    bbbb_gradient_bound, bbbb_proof_constant, delta_budget, fit_constant, klm_ratio, l2_norm_sq, ConstantsLedger,
    LedgerInputs,
};
use ma_continuity::fields::{density_from_spec, DensitySpec};
use ma_continuity::geometry::{Manifold, ManifoldGrid};
use ma_continuity::solver::{continuity_solve, SolverConfig};
use ma_continuity::transport::TransportProblem;
use ma_continuity::wasserstein::{w1, w2};

fn main() -> ma_continuity::Result<()> {
    let grid = Arc::new(ManifoldGrid::new(Manifold::torus(&[TAU]), &[128])?);
    let mu = density_from_spec(&grid, &DensitySpec::Uniform)?;
    let (mut klm, mut squeeze) = (Vec::new(), Vec::new());
    let mut ledger = None;
    println!("{:>5} {:>11} {:>11} {:>11} {:>11}", "seed", "W₁", "‖u‖²", "C_k ratio", "C_b ratio");
    for seed in 1..=8 {
        let spec = DensitySpec::RandomFourier { amplitude: 1e-4, modes: 2, seed: Some(seed) };
        let nu = density_from_spec(&grid, &spec)?;
        let problem = TransportProblem::new(mu.clone(), nu.clone())?;
        let l = ConstantsLedger::assemble(&problem, &LedgerInputs::default())?;
        let u = continuity_solve(&problem, &SolverConfig::default(), &l)?.final_state().unwrap().u.clone();
        let (d1, l2) = (w1(&mu, &nu)?, l2_norm_sq(&u, &mu));
        let obs = bbbb_gradient_bound(&u, l.semiconvexity, &mu)?;
        println!("{seed:>5} {d1:>11.3e} {l2:>11.3e} {:>11.3e} {:>11.3e}", klm_ratio(l2, d1), obs.ratio);
        klm.push(klm_ratio(l2, d1));
        squeeze.push(obs.ratio);
        ledger = Some(l);
    }
    let l = ledger.unwrap();
    let (ck, cb) = (fit_constant(&klm), fit_constant(&squeeze));
    let delta = delta_budget(l.delta0, 1, ck, cb);
    println!("\nfitted C_k = {ck:.4e}, C_b = {cb:.4e} (ball-argument constant {:.4e})", bbbb_proof_constant(l.semiconvexity, 1, mu.min_density()));
    println!("δ₀ = {:.4e} → W₂² budget δ = {delta:.4e}", l.delta0);
    let nu = density_from_spec(&grid, &DensitySpec::RandomFourier { amplitude: 1e-4, modes: 2, seed: Some(99) })?;
    println!("fresh pair: W₂² = {:.4e} (below δ: {})", w2(&mu, &nu)?.powi(2), w2(&mu, &nu)?.powi(2) < delta);
    Ok(())
}
