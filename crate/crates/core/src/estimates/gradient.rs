use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fields::{frame_derivatives, DensityField, Potential};
use crate::linalg;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BbbbObservation {
    /// `b = max |∇u|`.
    pub b: f64,
    /// `‖u‖²_{L²(dμ)}`.
    pub l2_sq: f64,
    /// `b^{n+4} / ‖u‖²` (zero when `u ≡ 0`).
    pub ratio: f64,
}

/// `∫ u² dμ` by cell quadrature.
pub fn l2_norm_sq(u: &Potential, mu: &DensityField) -> f64 {
    mu.masses().iter().zip(u.values()).map(|(m, v)| m * v * v).sum()
}

/// Observed gradient squeeze `b^{n+4} ≤ C ‖u‖²` for a semi-convex `u`.
pub fn bbbb_gradient_bound(u: &Potential, a: f64, mu: &DensityField) -> Result<BbbbObservation> {
    if **u.grid() != **mu.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = u.grid();
    let n = grid.dim();
    let (grad, hess) = frame_derivatives(grid, u.values());
    let min_eig = hess.iter().map(|h| linalg::min_eigenvalue(n, h)).fold(f64::INFINITY, f64::min);
    if min_eig < -a - 1e-9 * a.max(1.0) {
        return Err(Error::NotSemiconvex { min_eig, bound: a });
    }
    let b = grad.iter().map(|g| linalg::norm(n, g)).fold(0.0, f64::max);
    let l2_sq = l2_norm_sq(u, mu);
    let top = b.powi(n as i32 + 4);
    let ratio = if top == 0.0 { 0.0 } else { top / l2_sq };
    Ok(BbbbObservation { b, l2_sq, ratio })
}

fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("dimension {n} unsupported"),
    }
}

/// Constant of the ball argument in the regime `b < A`:
/// `‖u‖² ≥ min μ · ω_n (b/11A)^n (7b²/80A)²`, so
/// `b^{n+4} ≤ ‖u‖² / (min μ · ω_n (1/11A)^n (7/80A)²)`.
pub fn bbbb_proof_constant(a: f64, n: usize, min_density: f64) -> f64 {
    let ball = unit_ball_volume(n) * (1.0 / (11.0 * a)).powi(n as i32);
    let gap = 7.0 / (80.0 * a);
    1.0 / (min_density * ball * gap * gap)
}

/// `∫|u|² dμ / W₁^{1/2}`.
pub fn klm_ratio(l2_sq: f64, w1: f64) -> f64 {
    if l2_sq == 0.0 {
        0.0
    } else {
        l2_sq / w1.sqrt()
    }
}

/// Smallest constant consistent with every observed ratio.
pub fn fit_constant(ratios: &[f64]) -> f64 {
    ratios.iter().copied().filter(|r| r.is_finite()).fold(0.0, f64::max)
}

/// `W₂²` budget forcing `max |∇u| ≤ δ₀` through the chain
/// `b^{n+4} ≤ C_b ‖u‖² ≤ C_b C_k W₂^{1/4} < C_b C_k δ^{1/8}`:
/// `δ = (δ₀^{n+4} / (C_b C_k))⁸`.
pub fn delta_budget(delta0: f64, n: usize, klm_c: f64, bbbb_c: f64) -> f64 {
    (delta0.powi(n as i32 + 4) / (bbbb_c * klm_c)).powi(8)
}
