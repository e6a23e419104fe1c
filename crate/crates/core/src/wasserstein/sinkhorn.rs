use rayon::prelude::*;

use super::{pair_cost, Atom, CostExponent};
use crate::geometry::Manifold;
use crate::{Error, Result};

/// Target L1 marginal violation.
pub const SINKHORN_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SinkhornResult {
    pub epsilon: f64,
    /// Entropic dual potentials.
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// `⟨γ, C⟩` for the entropic plan.
    pub primal_cost: f64,
    /// `⟨f, a⟩ + ⟨g, b⟩`.
    pub dual_cost: f64,
    /// `OT_ε(μ,ν) - (OT_ε(μ,μ) + OT_ε(ν,ν))/2`.
    pub debiased_cost: f64,
    /// L1 violation of the row marginal after the last column update.
    pub marginal_violation: f64,
    pub iterations: usize,
    /// `false` when the iteration limit was hit first.
    pub converged: bool,
}

fn log_sum_exp(it: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = it.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

struct Problem<'a> {
    manifold: &'a Manifold,
    exponent: CostExponent,
    x: &'a [Atom],
    y: &'a [Atom],
    log_a: Vec<f64>,
    log_b: Vec<f64>,
}

impl Problem<'_> {
    fn cost(&self, i: usize, j: usize) -> f64 {
        pair_cost(self.manifold, self.exponent, &self.x[i], &self.y[j])
    }

    /// `f_i = -ε log Σ_j b_j exp((g_j - C_ij)/ε)`.
    fn update_f(&self, g: &[f64], eps: f64) -> Vec<f64> {
        (0..self.x.len())
            .into_par_iter()
            .map(|i| -eps * log_sum_exp((0..self.y.len()).map(|j| (g[j] - self.cost(i, j)) / eps + self.log_b[j])))
            .collect()
    }

    fn update_g(&self, f: &[f64], eps: f64) -> Vec<f64> {
        (0..self.y.len())
            .into_par_iter()
            .map(|j| -eps * log_sum_exp((0..self.x.len()).map(|i| (f[i] - self.cost(i, j)) / eps + self.log_a[i])))
            .collect()
    }

    fn row_violation(&self, f: &[f64], g: &[f64], eps: f64) -> f64 {
        (0..self.x.len())
            .into_par_iter()
            .map(|i| {
                let s: f64 = (0..self.y.len())
                    .map(|j| ((f[i] + g[j] - self.cost(i, j)) / eps + self.log_a[i] + self.log_b[j]).exp())
                    .sum();
                (s - self.x[i].mass).abs()
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }

    fn primal(&self, f: &[f64], g: &[f64], eps: f64) -> f64 {
        (0..self.x.len())
            .into_par_iter()
            .map(|i| {
                (0..self.y.len())
                    .map(|j| {
                        let c = self.cost(i, j);
                        ((f[i] + g[j] - c) / eps + self.log_a[i] + self.log_b[j]).exp() * c
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }

    fn dual(&self, f: &[f64], g: &[f64]) -> f64 {
        self.x.iter().zip(f).map(|(a, v)| a.mass * v).sum::<f64>()
            + self.y.iter().zip(g).map(|(b, v)| b.mass * v).sum::<f64>()
    }

    fn max_cost(&self) -> f64 {
        (0..self.x.len())
            .into_par_iter()
            .map(|i| (0..self.y.len()).map(|j| self.cost(i, j)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }
}

fn logs(atoms: &[Atom]) -> Vec<f64> {
    atoms.iter().map(|a| a.mass.ln()).collect()
}

/// Runs the alternating updates with ε-scaling from the cost scale down to
/// `eps`. Returns `(f, g, violation, iterations, converged)`.
fn iterate(p: &Problem, eps: f64, max_iter: usize) -> (Vec<f64>, Vec<f64>, f64, usize, bool) {
    let mut f = vec![0.0; p.x.len()];
    let mut g = vec![0.0; p.y.len()];
    let mut e = p.max_cost().max(eps);
    while e > eps {
        for _ in 0..10 {
            f = p.update_f(&g, e);
            g = p.update_g(&f, e);
        }
        e = (e * 0.5).max(eps);
        if e <= eps {
            break;
        }
    }
    let mut viol = f64::INFINITY;
    for it in 1..=max_iter {
        f = p.update_f(&g, eps);
        g = p.update_g(&f, eps);
        if it % 5 == 0 || it == max_iter {
            viol = p.row_violation(&f, &g, eps);
            if viol <= SINKHORN_TOL {
                return (f, g, viol, it, true);
            }
        }
    }
    (f, g, viol, max_iter, false)
}

/// Symmetric entropic self-transport value `OT_ε(α, α)`.
fn self_transport(manifold: &Manifold, exponent: CostExponent, atoms: &[Atom], eps: f64, max_iter: usize) -> f64 {
    let p = Problem { manifold, exponent, x: atoms, y: atoms, log_a: logs(atoms), log_b: logs(atoms) };
    let mut f = vec![0.0; atoms.len()];
    for _ in 0..max_iter.min(500) {
        let t = p.update_f(&f, eps);
        let diff = f.iter().zip(&t).map(|(a, b)| (0.5 * (a + b) - a).abs()).fold(0.0, f64::max);
        f = f.iter().zip(&t).map(|(a, b)| 0.5 * (a + b)).collect();
        if diff < 1e-12 * (1.0 + eps) {
            break;
        }
    }
    2.0 * atoms.iter().zip(&f).map(|(a, v)| a.mass * v).sum::<f64>()
}

/// Log-domain Sinkhorn for the cost `d^p` with regularization `epsilon`.
///
/// Hitting `max_iter` is not an error: the result carries `converged = false`
/// and its marginal violation.
pub fn sinkhorn(
    manifold: &Manifold,
    mu: &[Atom],
    nu: &[Atom],
    exponent: CostExponent,
    epsilon: f64,
    max_iter: usize,
) -> Result<SinkhornResult> {
    if !(epsilon > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("sinkhorn epsilon {epsilon}")));
    }
    let p = Problem { manifold, exponent, x: mu, y: nu, log_a: logs(mu), log_b: logs(nu) };
    let (f, g, viol, iterations, converged) = iterate(&p, epsilon, max_iter);
    let primal_cost = p.primal(&f, &g, epsilon);
    let dual_cost = p.dual(&f, &g);
    let debiased_cost = dual_cost
        - 0.5 * self_transport(manifold, exponent, mu, epsilon, max_iter)
        - 0.5 * self_transport(manifold, exponent, nu, epsilon, max_iter);
    Ok(SinkhornResult {
        epsilon,
        f,
        g,
        primal_cost,
        dual_cost,
        debiased_cost,
        marginal_violation: viol,
        iterations,
        converged,
    })
}
