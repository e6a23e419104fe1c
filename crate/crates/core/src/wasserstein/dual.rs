use super::{atoms_from_density, check_pair, exact_ot, pair_cost, CostExponent, DiscretePlan};
use crate::fields::DensityField;
use crate::geometry::Manifold;
use crate::Result;

/// Dense Dijkstra over the bipartite dual graph. `forward` selects edge
/// orientation: source→target edges carry the reduced cost, reversed support
/// edges carry zero.
fn dijkstra(
    m: usize,
    n: usize,
    reduced: &impl Fn(usize, usize) -> f64,
    support_of_source: &[Vec<usize>],
    support_of_target: &[Vec<usize>],
    forward: bool,
) -> Vec<f64> {
    let total = m + n;
    let mut dist = vec![f64::INFINITY; total];
    let mut done = vec![false; total];
    dist[0] = 0.0;
    for _ in 0..total {
        let mut best = usize::MAX;
        let mut bd = f64::INFINITY;
        for (v, (&d, &fin)) in dist.iter().zip(&done).enumerate() {
            if !fin && d < bd {
                bd = d;
                best = v;
            }
        }
        if best == usize::MAX {
            break;
        }
        done[best] = true;
        let is_source = best < m;
        if is_source == forward {
            if is_source {
                let i = best;
                for j in 0..n {
                    let nd = bd + reduced(i, j);
                    if nd < dist[m + j] {
                        dist[m + j] = nd;
                    }
                }
            } else {
                let j = best - m;
                for i in 0..m {
                    let nd = bd + reduced(i, j);
                    if nd < dist[i] {
                        dist[i] = nd;
                    }
                }
            }
        } else if is_source {
            for &j in &support_of_source[best] {
                if bd < dist[m + j] {
                    dist[m + j] = bd;
                }
            }
        } else {
            for &i in &support_of_target[best - m] {
                if bd < dist[i] {
                    dist[i] = bd;
                }
            }
        }
    }
    dist
}

/// Replaces the plan's duals by the midpoint of the extreme optimal duals
/// (largest and smallest node potentials with `φ_0` fixed), which does not
/// depend on the pivoting history. For `μ = ν` this gives `φ = ψ = 0`.
pub(crate) fn center_duals(plan: &mut DiscretePlan, manifold: &Manifold) {
    let (m, n) = (plan.source.len(), plan.target.len());
    let cost = |i: usize, j: usize| pair_cost(manifold, plan.exponent, &plan.source[i], &plan.target[j]);
    // Node potentials: π_i = -φ_i, π_j = ψ_j.
    let reduced = |i: usize, j: usize| (cost(i, j) - plan.phi[i] - plan.psi[j]).max(0.0);
    let mut by_source = vec![Vec::new(); m];
    let mut by_target = vec![Vec::new(); n];
    for &(i, j, _) in &plan.coupling {
        by_source[i].push(j);
        by_target[j].push(i);
    }
    let up = dijkstra(m, n, &reduced, &by_source, &by_target, true);
    let down = dijkstra(m, n, &reduced, &by_source, &by_target, false);
    let delta: Vec<f64> = up.iter().zip(&down).map(|(u, d)| 0.5 * (u - d)).collect();
    for i in 0..m {
        plan.phi[i] -= delta[i];
    }
    for j in 0..n {
        plan.psi[j] += delta[m + j];
    }
    let base = plan.phi[0];
    for p in plan.phi.iter_mut() {
        *p -= base;
    }
    for p in plan.psi.iter_mut() {
        *p += base;
    }
}

/// Kantorovich potentials for the cost `d²/2` pairing `μ` with `ν`.
///
/// Returns `(φ, ψ)` on the grid with `φ(x) + ψ(y) ≤ d²(x, y)/2`, equality on
/// the support of the optimal plan, and `∫φ dμ = 0` (the shift is moved to
/// `ψ` so the pair stays admissible).
pub fn kantorovich_potentials(mu: &DensityField, nu: &DensityField) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pair(mu, nu)?;
    let manifold = mu.grid().manifold();
    let mut plan = exact_ot(manifold, &atoms_from_density(mu), &atoms_from_density(nu), CostExponent::Two)?;
    center_duals(&mut plan, manifold);
    let mut phi: Vec<f64> = plan.phi.iter().map(|p| 0.5 * p).collect();
    let mut psi: Vec<f64> = plan.psi.iter().map(|p| 0.5 * p).collect();
    let mean = mu.integrate(&phi);
    for p in phi.iter_mut() {
        *p -= mean;
    }
    for p in psi.iter_mut() {
        *p += mean;
    }
    Ok((phi, psi))
}
