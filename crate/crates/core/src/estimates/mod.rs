//! Quantitative side of the a priori estimate: the constants ledger, the
//! dichotomy split, the Step-4 guard, the `Λ`/`|w|` extraction, the gradient
//! squeeze constants and the Korevaar-type test function checks on the flat
//! torus.

mod dichotomy;
mod gradient;
mod korevaar;
mod lambda;

pub use dichotomy::{
    dichotomy_split, dichotomy_split_degree, guard_check, guard_check_raw, max_delta0, DichotomyReport, GuardVerdict,
    SplitOutcome,
};
pub use gradient::{
    bbbb_gradient_bound, bbbb_proof_constant, delta_budget, fit_constant, klm_ratio, l2_norm_sq, BbbbObservation,
};
pub use korevaar::{cf2_contraction, cl1_torus_check, korevaar_eta, Cl1Report};
pub use lambda::{chart_equivalence_holds, lambda_field, w_abs, LambdaField};

use serde::{Deserialize, Serialize};

use crate::fields::{fd_gradient, DensityField};
use crate::geometry::Manifold;
use crate::linalg;
use crate::transport::TransportProblem;
use crate::{Error, Result};

/// `C₃ = 4n · 2.3^{11n} · max_K D²c`.
pub fn c3_constant(n: usize, max_d2c: f64) -> f64 {
    4.0 * n as f64 * 2.3f64.powi(11 * n as i32) * max_d2c
}

/// `(1/2.21)^{11n} C₃`, the lower bound on `w₁₁` at the maximum of `ηV̄`.
pub fn c3_tilde(n: usize, c3: f64) -> f64 {
    c3 / 2.21f64.powi(11 * n as i32)
}

/// `c_n = ε_n = 1/(11n)`.
pub fn c_n(n: usize) -> f64 {
    1.0 / (11.0 * n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum C12Mode {
    /// Conservative assembly from the flat-torus test-function constants.
    #[default]
    Analytic,
    /// Empirically calibrated values supplied by the caller.
    Calibrated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerInputs {
    /// Admission budget on the log-densities; `None` uses the measured norm.
    pub c_bar: Option<f64>,
    /// Semi-convexity bound `A`; `None` uses `max_K D²c`.
    pub semiconvexity: Option<f64>,
    /// `None` picks `0.9 ×` the largest admissible `δ₀`.
    pub delta0: Option<f64>,
    /// Required in calibrated mode, rejected in analytic mode.
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c12_mode: C12Mode,
    /// Fitted constant in `∫|u|² dμ ≤ C W₁^{1/2}`.
    pub klm_c: Option<f64>,
    /// Fitted constant in `b^{n+4} ≤ C ‖u‖²`.
    pub bbbb_c: Option<f64>,
    /// Radius of the working neighbourhood `K`; `None` is `ι/2`.
    pub working_radius: Option<f64>,
}

impl Default for LedgerInputs {
    fn default() -> Self {
        Self {
            c_bar: None,
            semiconvexity: None,
            delta0: None,
            c1: None,
            c2: None,
            c12_mode: C12Mode::Analytic,
            klm_c: None,
            bbbb_c: None,
            working_radius: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub n: usize,
    /// `3n - 1` in the dichotomy bound.
    pub dichotomy: usize,
    /// `2n - 1` in the test-function bound.
    pub test_function: usize,
    /// `n + 4` in the gradient squeeze.
    pub gradient: usize,
    pub c_n: f64,
    pub eps_n: f64,
}

impl Exponents {
    pub fn new(n: usize) -> Self {
        Self { n, dichotomy: 3 * n - 1, test_function: 2 * n - 1, gradient: n + 4, c_n: c_n(n), eps_n: c_n(n) }
    }
}

/// Every constant the guard and the reports use, assembled once per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub exponents: Exponents,
    pub c_bar: f64,
    /// Largest admission norm of the two densities.
    pub c_bar_measured: f64,
    /// Whether both densities satisfy the `C̄` budget.
    pub admissible: bool,
    pub semiconvexity: f64,
    pub working_radius: f64,
    pub max_d2c: f64,
    /// `sup_K |(D D̄c)⁻¹|`.
    pub c5: f64,
    /// Lower bound on `det w` along the path.
    pub c7: f64,
    /// Bound on `|Df|`, `|Dg_t|` along the path.
    pub gradient_bound: f64,
    pub c3: f64,
    pub c3_tilde: f64,
    pub c1: f64,
    pub c2: f64,
    pub c12_mode: C12Mode,
    /// Torus constants of the test-function inequality.
    pub cl1_c1: f64,
    pub cl1_c2: f64,
    pub delta0: f64,
    pub delta0_auto: bool,
    /// Largest `δ₀` with `a < C₃ < C₃ + 1 < b`.
    pub delta0_max: f64,
    pub split: SplitOutcome,
    pub klm_c: Option<f64>,
    pub bbbb_c: Option<f64>,
    /// `W₂²` budget, when both fitted constants are known.
    pub delta: Option<f64>,
}

impl ConstantsLedger {
    pub fn assemble(problem: &TransportProblem, inputs: &LedgerInputs) -> Result<Self> {
        Self::assemble_for(problem.grid().manifold(), problem.mu(), problem.nu(), inputs)
    }

    pub fn assemble_for(
        manifold: &Manifold,
        mu: &DensityField,
        nu: &DensityField,
        inputs: &LedgerInputs,
    ) -> Result<Self> {
        let n = manifold.dim();
        let radius = inputs.working_radius.unwrap_or(manifold.injectivity_radius() / 2.0);
        let max_d2c = manifold.max_d2c(radius);
        let c3 = c3_constant(n, max_d2c);
        let c_bar_measured = mu.admission_norm().max(nu.admission_norm());
        let c_bar = inputs.c_bar.unwrap_or(c_bar_measured);
        let semiconvexity = inputs.semiconvexity.unwrap_or(max_d2c);

        let (fmin, fmax) = min_max(mu.log_density());
        let (_, gmax) = min_max(nu.log_density());
        // det w = exp(ζ + f - g_t(T)) with ζ ≥ 0 and g_t between the endpoints.
        let c7 = (fmin - fmax.max(gmax)).exp();
        let grad = |field: &DensityField| {
            fd_gradient(field.grid(), field.log_density())
                .iter()
                .map(|g| linalg::norm(n, g))
                .fold(0.0, f64::max)
        };
        let gradient_bound = grad(mu).max(grad(nu));
        let cl1_c1 = 0.0;
        let cl1_c2 = 4.0 * n as f64 / c7 + 8.0 * gradient_bound * gradient_bound;
        let (c1, c2) = calibration(manifold, inputs, cl1_c1, cl1_c2)?;

        let k = 3 * n - 1;
        let delta0_max = max_delta0(c1, c2, n, c3);
        let (delta0, delta0_auto) = match inputs.delta0 {
            Some(d) if d > 0.0 => (d, false),
            Some(d) => return Err(Error::ParameterOutOfRange(format!("delta0 = {d}"))),
            None => (0.9 * delta0_max, true),
        };
        let split = dichotomy_split_degree(c1, c2, delta0, k);
        let delta = match (inputs.klm_c, inputs.bbbb_c) {
            (Some(klm), Some(bbbb)) => Some(delta_budget(delta0, n, klm, bbbb)),
            _ => None,
        };
        Ok(Self {
            exponents: Exponents::new(n),
            c_bar,
            c_bar_measured,
            admissible: c_bar_measured <= c_bar,
            semiconvexity,
            working_radius: radius,
            max_d2c,
            c5: manifold.inverse_mixed_bound(radius),
            c7,
            gradient_bound,
            c3,
            c3_tilde: c3_tilde(n, c3),
            c1,
            c2,
            c12_mode: inputs.c12_mode,
            cl1_c1,
            cl1_c2,
            delta0,
            delta0_auto,
            delta0_max,
            split,
            klm_c: inputs.klm_c,
            bbbb_c: inputs.bbbb_c,
            delta,
        })
    }

    pub fn n(&self) -> usize {
        self.exponents.n
    }

    /// `(a, b)` when the dichotomy splits.
    pub fn split_roots(&self) -> Option<(f64, f64)> {
        match self.split {
            SplitOutcome::Split { a, b } => Some((a, b)),
            SplitOutcome::NoSplit { .. } => None,
        }
    }

    /// The split exists and brackets `[C₃, C₃ + 1]`.
    pub fn split_brackets_c3(&self) -> bool {
        self.split_roots().is_some_and(|(a, b)| a < self.c3 && self.c3 + 1.0 < b)
    }
}

/// `(C₁, C₂)` for the dichotomy bound. In analytic mode the torus bound
/// `½|w|/δ₀² ≤ C′₁ + C′₂|w|^{2n-1}` is lifted to degree `3n - 1` using
/// `|w|^{2n-1} ≤ 1 + |w|^{3n-1}`.
fn calibration(manifold: &Manifold, inputs: &LedgerInputs, cl1_c1: f64, cl1_c2: f64) -> Result<(f64, f64)> {
    match inputs.c12_mode {
        C12Mode::Analytic => {
            if inputs.c1.is_some() || inputs.c2.is_some() {
                return Err(Error::Config("c1/c2 are assembled in analytic mode; use calibrated mode to supply them".into()));
            }
            if !manifold.is_torus() {
                return Err(Error::UnsupportedManifold("analytic C₁/C₂ assembly needs a flat torus".into()));
            }
            Ok((2.0 * (cl1_c1 + cl1_c2), 2.0 * cl1_c2))
        }
        C12Mode::Calibrated => {
            let (Some(c1), Some(c2)) = (inputs.c1, inputs.c2) else {
                return Err(Error::Config("calibrated mode needs both c1 and c2".into()));
            };
            for (name, v) in [("c1", c1), ("c2", c2)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::ParameterOutOfRange(format!("ledger {name} = {v} must be positive")));
                }
            }
            Ok((c1, c2))
        }
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}
