use serde::{Deserialize, Serialize};

use super::{korevaar_eta, ConstantsLedger};
use crate::linalg::Vec3;
use crate::solver::PathState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitOutcome {
    /// `x/δ₀² ≤ C₁ + C₂x^k` forces `x ∈ [0, a] ∪ [b, ∞)`.
    Split { a: f64, b: f64 },
    /// The line stays below the polynomial; `δ₀` must drop below the
    /// tangency value for a split.
    NoSplit { tangency_delta0: f64 },
}

/// Split of `x/δ₀² = C₁ + C₂x^{3n-1}` into its two positive roots.
pub fn dichotomy_split(c1: f64, c2: f64, delta0: f64, n: usize) -> SplitOutcome {
    dichotomy_split_degree(c1, c2, delta0, 3 * n - 1)
}

/// Same as [`dichotomy_split`] for an arbitrary degree `k ≥ 2`.
pub fn dichotomy_split_degree(c1: f64, c2: f64, delta0: f64, k: usize) -> SplitOutcome {
    assert!(k >= 2, "degree must be at least 2");
    let kf = k as f64;
    let slope = 1.0 / (delta0 * delta0);
    // g(x) = C₁ + C₂x^k - x/δ₀² is convex with g(0) = C₁ > 0.
    let g = |x: f64| c1 + c2 * x.powi(k as i32) - slope * x;
    let x_star = (slope / (kf * c2)).powf(1.0 / (kf - 1.0));
    let x_tan = (c1 / ((kf - 1.0) * c2)).powf(1.0 / kf);
    let tangency_delta0 = (kf * c2 * x_tan.powi(k as i32 - 1)).powf(-0.5);
    if !(g(x_star) < 0.0) {
        return SplitOutcome::NoSplit { tangency_delta0 };
    }
    let a = bisect(&g, 0.0, x_star);
    let mut hi = 2.0 * x_star;
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    let b = bisect(&g, x_star, hi);
    SplitOutcome::Split { a, b }
}

/// Root of `g` in `[lo, hi]` where `g(lo)` and `g(hi)` differ in sign;
/// runs until the bracket stops shrinking.
fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let lo_sign = g(lo) > 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) > 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if g(lo).abs() <= g(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Largest `δ₀` for which both `C₃` and `C₃ + 1` lie strictly inside the
/// split, i.e. `g(C₃) < 0` and `g(C₃ + 1) < 0`.
pub fn max_delta0(c1: f64, c2: f64, n: usize, c3: f64) -> f64 {
    let k = (3 * n - 1) as i32;
    [c3, c3 + 1.0]
        .iter()
        .map(|&x| (x / (c1 + c2 * x.powi(k))).sqrt())
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum GuardVerdict {
    /// `Λ_max ≤ a`.
    Ok,
    /// `a < Λ_max ≤ C₃`: discrete overshoot, not a contradiction.
    Warning,
    /// `C₃ < Λ_max < b`.
    Violated,
    /// `Λ_max ≥ b`.
    Catastrophic,
    /// The guard does not apply to this state.
    PreconditionUnmet { reason: String },
}

impl GuardVerdict {
    pub fn is_failure(&self) -> bool {
        matches!(self, Self::Violated | Self::Catastrophic)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Warning => "warning",
            Self::Violated => "violated",
            Self::Catastrophic => "catastrophic",
            Self::PreconditionUnmet { .. } => "precondition_unmet",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub t: f64,
    pub lambda_max: f64,
    /// Chart coordinates of the `Λ` maximizer.
    pub location: Vec3,
    pub direction: Vec3,
    pub grad_max: f64,
    /// `η` at the maximizer and its supremum over the grid.
    pub eta_center: f64,
    pub eta_sup: f64,
    /// `Λ/δ₀²`.
    pub lhs: f64,
    /// `C₁ + C₂Λ^{3n-1}`.
    pub rhs: f64,
    pub verdict: GuardVerdict,
}

/// Classifies `Λ_max` against the ledger split.
pub fn guard_check_raw(lambda_max: f64, grad_max: f64, ledger: &ConstantsLedger) -> GuardVerdict {
    let Some((a, b)) = ledger.split_roots() else {
        return GuardVerdict::PreconditionUnmet { reason: "the dichotomy does not split at this δ₀".into() };
    };
    if !ledger.split_brackets_c3() {
        return GuardVerdict::PreconditionUnmet {
            reason: format!("δ₀ = {:.6e} exceeds the largest admissible δ₀ = {:.6e}", ledger.delta0, ledger.delta0_max),
        };
    }
    if grad_max > ledger.delta0 {
        return GuardVerdict::PreconditionUnmet {
            reason: format!("gradient budget exceeded: max|∇u| = {grad_max:.6e} > δ₀ = {:.6e}", ledger.delta0),
        };
    }
    if lambda_max <= a {
        GuardVerdict::Ok
    } else if lambda_max <= ledger.c3 {
        GuardVerdict::Warning
    } else if lambda_max < b {
        GuardVerdict::Violated
    } else {
        GuardVerdict::Catastrophic
    }
}

/// Hessian guard for an accepted path state.
pub fn guard_check(state: &PathState, ledger: &ConstantsLedger) -> DichotomyReport {
    let grid = state.u.grid();
    let x0 = grid.point(state.lambda_argmax);
    let eta = korevaar_eta(&state.u, ledger.delta0, &x0);
    let k = ledger.exponents.dichotomy as i32;
    DichotomyReport {
        t: state.t,
        lambda_max: state.lambda_max,
        location: x0,
        direction: state.lambda_direction,
        grad_max: state.grad_max,
        eta_center: eta[state.lambda_argmax],
        eta_sup: eta.iter().copied().fold(0.0, f64::max),
        lhs: state.lambda_max / (ledger.delta0 * ledger.delta0),
        rhs: ledger.c1 + ledger.c2 * state.lambda_max.powi(k),
        verdict: guard_check_raw(state.lambda_max, state.grad_max, ledger),
    }
}
