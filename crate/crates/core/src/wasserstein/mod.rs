//! Discrete optimal transport between grid densities.
//!
//! [`exact_ot`] solves the transport LP with a network simplex and certifies
//! optimality through the recovered duals. Small instances use the complete
//! bipartite graph; larger ones start from nearest-neighbour candidate arcs
//! and add violated arcs by full pricing until the duals are feasible.
//! [`sinkhorn`] is the entropic alternative for sweeps.

mod dual;
mod simplex;
mod sinkhorn;

pub use dual::kantorovich_potentials;
pub use sinkhorn::{sinkhorn, SinkhornResult};

use serde::{Deserialize, Serialize};

use crate::fields::DensityField;
use crate::geometry::Manifold;
use crate::linalg::Vec3;
use crate::{Error, Result};
use simplex::NetworkSimplex;

/// Atom cap per side for the exact solver.
pub const MAX_ATOMS: usize = 4096;
/// Mass mismatch tolerated between the two sides.
pub const MASS_TOL: f64 = 1e-9;
/// Instances with more candidate pairs than this use column generation.
pub const DENSE_PAIR_LIMIT: usize = 250_000;
/// Relative duality gap accepted as an optimality certificate.
pub const GAP_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostExponent {
    /// Cost `d`.
    One,
    /// Cost `d²`.
    Two,
}

impl CostExponent {
    pub fn from_p(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            _ => Err(Error::ParameterOutOfRange(format!("cost exponent p = {p}"))),
        }
    }

    pub fn apply(self, d: f64) -> f64 {
        match self {
            Self::One => d,
            Self::Two => d * d,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub point: Vec3,
    pub mass: f64,
}

/// One atom per grid cell at the cell centre, carrying the cell mass.
pub fn atoms_from_density(field: &DensityField) -> Vec<Atom> {
    let grid = field.grid();
    field
        .masses()
        .into_iter()
        .enumerate()
        .map(|(i, mass)| Atom { point: grid.point(i), mass })
        .collect()
}

#[derive(Clone, Debug)]
pub struct DiscretePlan {
    pub source: Vec<Atom>,
    pub target: Vec<Atom>,
    pub exponent: CostExponent,
    /// Nonzero entries `(i, j, γ_ij)`.
    pub coupling: Vec<(usize, usize, f64)>,
    pub total_cost: f64,
    /// LP duals with `φ_i + ψ_j ≤ cost(i, j)`.
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// `total_cost - (Σ a_i φ_i + Σ b_j ψ_j)`.
    pub duality_gap: f64,
    /// Largest violation of `φ_i + ψ_j ≤ cost(i, j)` over all pairs.
    pub dual_violation: f64,
    pub pivots: usize,
}

impl DiscretePlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.source.len()];
        for &(i, _, g) in &self.coupling {
            r[i] += g;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.target.len()];
        for &(_, j, g) in &self.coupling {
            c[j] += g;
        }
        c
    }

    /// Largest marginal error of the coupling.
    pub fn marginal_violation(&self) -> f64 {
        let r = self.row_sums().iter().zip(&self.source).map(|(s, a)| (s - a.mass).abs()).fold(0.0, f64::max);
        let c = self.col_sums().iter().zip(&self.target).map(|(s, b)| (s - b.mass).abs()).fold(0.0, f64::max);
        r.max(c)
    }

    /// Optimality certificate: small gap and feasible duals.
    pub fn certified(&self) -> bool {
        let scale = self.total_cost.abs().max(f64::MIN_POSITIVE);
        self.duality_gap.abs() <= GAP_TOL * scale.max(1e-300) + 1e-15 && self.dual_violation <= 1e-12
    }
}

fn pair_cost(manifold: &Manifold, exponent: CostExponent, a: &Atom, b: &Atom) -> f64 {
    exponent.apply(manifold.distance(&a.point, &b.point))
}

fn check_inputs(mu: &[Atom], nu: &[Atom]) -> Result<()> {
    let got = mu.len().max(nu.len());
    if got > MAX_ATOMS {
        return Err(Error::SizeExceeded { cap: MAX_ATOMS, got });
    }
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::ParameterOutOfRange("empty atom list".into()));
    }
    if mu.iter().chain(nu).any(|a| !(a.mass >= 0.0) || !a.mass.is_finite()) {
        return Err(Error::ParameterOutOfRange("atom masses must be finite and nonnegative".into()));
    }
    let (sm, tm) = (mu.iter().map(|a| a.mass).sum::<f64>(), nu.iter().map(|a| a.mass).sum::<f64>());
    if (sm - tm).abs() > MASS_TOL {
        return Err(Error::InfeasibleMass { source_mass: sm, target_mass: tm });
    }
    Ok(())
}

/// Optimal coupling for the cost `d^p` between two atom sets on a manifold.
pub fn exact_ot(manifold: &Manifold, mu: &[Atom], nu: &[Atom], exponent: CostExponent) -> Result<DiscretePlan> {
    exact_ot_with_limit(manifold, mu, nu, exponent, DENSE_PAIR_LIMIT)
}

pub(crate) fn exact_ot_with_limit(
    manifold: &Manifold,
    mu: &[Atom],
    nu: &[Atom],
    exponent: CostExponent,
    dense_limit: usize,
) -> Result<DiscretePlan> {
    check_inputs(mu, nu)?;
    let (m, n) = (mu.len(), nu.len());
    let max_cost = exponent.apply(manifold.diameter()) * (1.0 + 1e-12);
    let mut supply: Vec<f64> = mu.iter().map(|a| a.mass).collect();
    supply.extend(nu.iter().map(|b| -b.mass));
    let mut ns = NetworkSimplex::new(&supply, max_cost);
    let max_pivots = 200 * (m + n) * ((m + n) as f64).log2().max(1.0) as usize + 100_000;

    let cost = |i: usize, j: usize| pair_cost(manifold, exponent, &mu[i], &nu[j]);

    if m * n <= dense_limit {
        for i in 0..m {
            for j in 0..n {
                ns.add_arc(i, m + j, cost(i, j));
            }
        }
        ns.run(max_pivots)?;
    } else {
        seed_candidate_arcs(&mut ns, m, n, &cost);
        loop {
            ns.run(max_pivots)?;
            let added = price_and_add(&mut ns, m, n, &cost);
            if added == 0 {
                break;
            }
        }
    }
    if ns.artificial_flow() > 1e-12 {
        return Err(Error::NetworkSimplex(format!(
            "flow {:e} left on artificial arcs",
            ns.artificial_flow()
        )));
    }

    let mut coupling = Vec::new();
    let mut total = 0.0;
    for k in 0..ns.arc_count() {
        let (i, t, f) = ns.real_arc(k);
        if f > 0.0 {
            let j = t - m;
            total += f * cost(i, j);
            coupling.push((i, j, f));
        }
    }
    coupling.sort_by_key(|&(i, j, _)| (i, j));

    // Reduced cost c_ij + π_i - π_j ≥ 0 gives φ_i = -π_i, ψ_j = π_j; shift
    // so the duals are centred around zero.
    let shift = ns.potential(0);
    let phi: Vec<f64> = (0..m).map(|i| shift - ns.potential(i)).collect();
    let psi: Vec<f64> = (0..n).map(|j| ns.potential(m + j) - shift).collect();
    let dual: f64 = mu.iter().zip(&phi).map(|(a, p)| a.mass * p).sum::<f64>()
        + nu.iter().zip(&psi).map(|(b, p)| b.mass * p).sum::<f64>();
    let dual_violation = max_dual_violation(m, n, &phi, &psi, &cost);

    Ok(DiscretePlan {
        source: mu.to_vec(),
        target: nu.to_vec(),
        exponent,
        coupling,
        total_cost: total,
        phi,
        psi,
        duality_gap: total - dual,
        dual_violation,
        pivots: ns.pivots,
    })
}

fn max_dual_violation(m: usize, n: usize, phi: &[f64], psi: &[f64], cost: &impl Fn(usize, usize) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..n {
            worst = worst.max(phi[i] + psi[j] - cost(i, j));
        }
    }
    worst
}

const CANDIDATES: usize = 12;
const ADD_PER_ROW: usize = 6;

fn seed_candidate_arcs(ns: &mut NetworkSimplex, m: usize, n: usize, cost: &impl Fn(usize, usize) -> f64) {
    let mut seen = std::collections::HashSet::new();
    let mut row: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..m {
        row.clear();
        row.extend((0..n).map(|j| (cost(i, j), j)));
        let k = CANDIDATES.min(n);
        row.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        for &(c, j) in &row[..k] {
            if seen.insert((i, j)) {
                ns.add_arc(i, m + j, c);
            }
        }
    }
    let mut col: Vec<(f64, usize)> = Vec::with_capacity(m);
    for j in 0..n {
        col.clear();
        col.extend((0..m).map(|i| (cost(i, j), i)));
        let k = CANDIDATES.min(m);
        col.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        for &(c, i) in &col[..k] {
            if seen.insert((i, j)) {
                ns.add_arc(i, m + j, c);
            }
        }
    }
}

/// Adds the most violated arcs of each row; returns how many were added.
fn price_and_add(ns: &mut NetworkSimplex, m: usize, n: usize, cost: &impl Fn(usize, usize) -> f64) -> usize {
    let scale = (0..n).map(|j| cost(0, j)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-13 * scale;
    let mut added = 0;
    let mut viol: Vec<(f64, usize)> = Vec::new();
    for i in 0..m {
        viol.clear();
        let pi_i = ns.potential(i);
        for j in 0..n {
            let c = cost(i, j);
            let rc = c + pi_i - ns.potential(m + j);
            if rc < -tol {
                viol.push((rc, j));
            }
        }
        if viol.is_empty() {
            continue;
        }
        let k = ADD_PER_ROW.min(viol.len());
        viol.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        for &(_, j) in &viol[..k] {
            ns.add_arc(i, m + j, cost(i, j));
            added += 1;
        }
    }
    added
}

fn check_pair(mu: &DensityField, nu: &DensityField) -> Result<()> {
    if **mu.grid() != **nu.grid() {
        return Err(Error::GridMismatch);
    }
    mu.require_normalized()?;
    nu.require_normalized()
}

/// `W₂(μ, ν)` with `W₂² = inf ∫ d² dγ`.
pub fn w2(mu: &DensityField, nu: &DensityField) -> Result<f64> {
    check_pair(mu, nu)?;
    let plan = exact_ot(mu.grid().manifold(), &atoms_from_density(mu), &atoms_from_density(nu), CostExponent::Two)?;
    Ok(plan.total_cost.max(0.0).sqrt())
}

/// `W₁(μ, ν) = inf ∫ d dγ`.
pub fn w1(mu: &DensityField, nu: &DensityField) -> Result<f64> {
    check_pair(mu, nu)?;
    let plan = exact_ot(mu.grid().manifold(), &atoms_from_density(mu), &atoms_from_density(nu), CostExponent::One)?;
    Ok(plan.total_cost.max(0.0))
}
