//! The dichotomy `x/δ₀² ≤ C₁ + C₂ x^{3n-1}`: where it splits, how the roots
//! move with δ₀, and the largest δ₀ that keeps C₃ inside the gap.
//!
//! cargo run --example dichotomy_split

use std::f64::consts::TAU;
use std::sync::Arc;

use ma_continuity::estimates::{dichotomy_split, ConstantsLedger, LedgerInputs, SplitOutcome};
use ma_continuity::fields::{density_from_spec, DensitySpec};
use ma_continuity::geometry::{Manifold, ManifoldGrid};

fn main() -> ma_continuity::Result<()> {
    for n in 1..=2 {
        let grid = Arc::new(ManifoldGrid::new(Manifold::torus(&vec![TAU; n]), &vec![16; n])?);
        let mu = density_from_spec(&grid, &DensitySpec::Uniform)?;
        let l = ConstantsLedger::assemble_for(grid.manifold(), &mu, &mu, &LedgerInputs::default())?;
        println!("T^{n}: C₁ = {}, C₂ = {}, degree {}, C₃ = {:.6e}", l.c1, l.c2, l.exponents.dichotomy, l.c3);
        println!("  largest admissible δ₀ = {:.4e}; auto δ₀ = {:.4e}", l.delta0_max, l.delta0);
        let mut d0 = 1.0;
        while d0 >= l.delta0_max * 0.1 {
            match dichotomy_split(l.c1, l.c2, d0, n) {
                SplitOutcome::Split { a, b } => {
                    let tag = if a < l.c3 && l.c3 + 1.0 < b { " (brackets C₃)" } else { "" };
                    println!("  δ₀ = {d0:.0e}: a = {a:.4e}, b = {b:.4e}{tag}");
                }
                SplitOutcome::NoSplit { tangency_delta0 } => {
                    println!("  δ₀ = {d0:.0e}: no split (needs δ₀ < {tangency_delta0:.4e})");
                }
            }
            d0 /= if n == 1 { 10.0 } else { 1e3 };
        }
        println!();
    }
    Ok(())
}
