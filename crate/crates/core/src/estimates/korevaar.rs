use serde::{Deserialize, Serialize};

use super::{lambda_field, w_abs, ConstantsLedger};
use crate::fields::{fd_gradient, fd_hessian, Potential};
use crate::geometry::min_image;
use crate::linalg::{self, Mat3, Vec3};
use crate::transport::{hessian_metric, transport_map, TransportProblem};
use crate::{Error, Result};

/// `η = (1 + |Du|²/δ₀² - 2|x - x₀|²)⁺` with coordinate gradients and the
/// chart offset from `x₀` (minimal image along periodic axes).
pub fn korevaar_eta(u: &Potential, delta0: f64, x0: &Vec3) -> Vec<f64> {
    let grid = u.grid();
    let n = grid.dim();
    let grad = fd_gradient(grid, u.values());
    (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            let mut r2 = 0.0;
            for a in 0..n {
                let mut d = x[a] - x0[a];
                if grid.is_periodic(a) {
                    d = min_image(d, grid.extent(a));
                }
                r2 += d * d;
            }
            let du2 = linalg::dot(n, &grad[i], &grad[i]);
            (1.0 + du2 / (delta0 * delta0) - 2.0 * r2).max(0.0)
        })
        .collect()
}

/// `w^{ij}(w_ki - c_ki)(w_kj - c_kj) = w^{ij} u_ki u_kj`.
pub fn cf2_contraction(n: usize, w: &Mat3, c_xx: &Mat3) -> f64 {
    let winv = linalg::inverse(n, w).expect("w must be invertible");
    let mut acc = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                acc += winv[i][j] * (w[k][i] - c_xx[k][i]) * (w[k][j] - c_xx[k][j]);
            }
        }
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cl1Report {
    pub x0: usize,
    pub x_max: usize,
    pub grad_max: f64,
    pub gradient_ok: bool,
    /// `w₁₁` at `x_max` after rotating `w` to diagonal form.
    pub w11: f64,
    pub threshold: f64,
    pub threshold_met: bool,
    /// `w^{ij}η_ij` with `η_ij` by finite differences of the `η` field.
    pub lhs_direct: f64,
    /// The same quantity from its expansion, with `w^{ij}u_ijk` taken from
    /// the differentiated equation `f_k - g_s w_sk`.
    pub lhs_equation: f64,
    /// `½|w|/δ₀² - C′₁ - C′₂|w|^{2n-1}`.
    pub rhs: f64,
    pub margin: f64,
    /// `w^{ij}u_ki u_kj`, its lower bound `w₁₁ - 2n max D²c`, and `½w₁₁`.
    pub cf2: f64,
    pub cf2_lower: f64,
    pub cf2_half: f64,
    pub cf2_chain_holds: bool,
    pub note: String,
}

impl Cl1Report {
    pub fn preconditions_met(&self) -> bool {
        self.gradient_ok && self.threshold_met
    }
}

/// Evaluates both sides of the test-function inequality at the maximizer of
/// `η · |w|^{c_n}` near the `Λ` maximizer, with explicit flat-torus constants.
pub fn cl1_torus_check(problem: &TransportProblem, u: &Potential, t: f64, ledger: &ConstantsLedger) -> Result<Cl1Report> {
    let grid = problem.grid();
    if **u.grid() != **grid {
        return Err(Error::GridMismatch);
    }
    let n = grid.dim();
    let delta0 = ledger.delta0;
    let map = transport_map(u)?;
    let wf = hessian_metric(grid, &map)?;
    wf.require_positive()?;
    let lambda = lambda_field(grid, &wf.w);
    let x0 = lambda.argmax;
    let eta = korevaar_eta(u, delta0, &grid.point(x0));
    let abs = w_abs(grid, &wf.w);
    let c_n = ledger.exponents.c_n;
    let mut x_max = x0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        let v = eta[i] * abs[i].powf(c_n);
        if v > best {
            best = v;
            x_max = i;
        }
    }

    let grad = fd_gradient(grid, u.values());
    let grad_max = grad.iter().map(|g| linalg::norm(n, g)).fold(0.0, f64::max);
    let gradient_ok = grad_max <= delta0;
    let w = wf.w[x_max];
    let winv = linalg::inverse(n, &w).expect("positive definite");
    let w11 = linalg::max_eigenvalue(n, &w);
    let threshold = ledger.c3_tilde;
    let threshold_met = w11 >= threshold;

    let eta_h = fd_hessian(grid, &eta)[x_max];
    let lhs_direct: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| winv[i][j] * eta_h[i][j]).sum();

    let cf2 = cf2_contraction(n, &w, &wf.tensors[x_max].c_xx);
    let df = fd_gradient(grid, problem.mu().log_density())[x_max];
    let (_, dg, _) = problem.target_log_density(t, &map.target[x_max]);
    let du = grad[x_max];
    let s = 2.0 / (delta0 * delta0);
    let mut drift = 0.0;
    for k in 0..n {
        let gw: f64 = (0..n).map(|sb| dg[sb] * w[sb][k]).sum();
        drift += du[k] * (df[k] - gw);
    }
    let lhs_equation = s * cf2 + s * drift - 4.0 * linalg::trace(n, &winv);
    let rhs = 0.5 * w11 / (delta0 * delta0) - ledger.cl1_c1 - ledger.cl1_c2 * w11.powi(2 * n as i32 - 1);
    let cf2_lower = w11 - 2.0 * n as f64 * ledger.max_d2c;
    let cf2_half = 0.5 * w11;
    let note = match (gradient_ok, threshold_met) {
        (true, true) => "preconditions met".to_string(),
        (false, _) => format!("gradient budget exceeded: {grad_max:.4e} > δ₀ = {delta0:.4e}"),
        (true, false) => format!("w₁₁ = {w11:.4e} below the threshold {threshold:.4e}"),
    };
    Ok(Cl1Report {
        x0,
        x_max,
        grad_max,
        gradient_ok,
        w11,
        threshold,
        threshold_met,
        lhs_direct,
        lhs_equation,
        rhs,
        margin: lhs_equation - rhs,
        cf2,
        cf2_lower,
        cf2_half,
        cf2_chain_holds: cf2 >= cf2_lower - 1e-12 * w11 && cf2_lower >= cf2_half,
        note,
    })
}
