use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{transport_jacobian, transport_map, TransportProblem};
use crate::fields::{PeriodicSpline, Potential};
use crate::geometry::ManifoldGrid;
use crate::linalg::{self, Vec3};
use crate::{Error, Result};

/// Sub-samples per cell and axis for the quadrature and the binned deposit.
const SUBSAMPLES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    /// `TV(T#μ, ρ(t)) = ½ ∫ |μ - ρ(t)∘T · det DT| dx`, pulled back to the
    /// source by the change of variables.
    pub tv: f64,
    /// `½ Σ |T#μ - ρ(t)|` over cells with sub-sampled mass moved by `T`.
    /// Carries an aliasing floor of order `(h/4)²`-relative that does not
    /// shrink under refinement.
    pub binned_tv: f64,
    /// `sup |det DT · e^{g(T) - f} - 1|` over grid points.
    pub jacobian_sup: f64,
    pub min_jacobian: f64,
    /// Every Kuhn simplex of the grid keeps its orientation under `T`; see
    /// [`injective_on_grid`].
    pub injective_on_grid: bool,
}

/// Permutations of `0..n` with their signs, for `n ≤ 3`.
fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    match n {
        1 => vec![(vec![0], 1.0)],
        2 => vec![(vec![0, 1], 1.0), (vec![1, 0], -1.0)],
        _ => vec![
            (vec![0, 1, 2], 1.0),
            (vec![1, 2, 0], 1.0),
            (vec![2, 0, 1], 1.0),
            (vec![0, 2, 1], -1.0),
            (vec![2, 1, 0], -1.0),
            (vec![1, 0, 2], -1.0),
        ],
    }
}

/// Injectivity of the piecewise-linear interpolant of `T` on a torus grid.
///
/// Each cell is split into `n!` Kuhn simplices. The lift `x + ∇u(x)` has
/// degree one because `∇u` is periodic, so if every simplex image is
/// positively oriented the interpolant is a homeomorphism of the torus.
pub fn injective_on_grid(grid: &ManifoldGrid, gradient: &[Vec3]) -> Result<bool> {
    if !grid.manifold().is_torus() {
        return Err(Error::UnsupportedManifold("grid injectivity needs a torus".into()));
    }
    let n = grid.dim();
    let perms = permutations(n);
    let ok = (0..grid.len()).into_par_iter().all(|i| {
        perms.iter().all(|(perm, sign)| {
            let mut edges = [[0.0; 3]; 3];
            let mut prev = i;
            for (k, &axis) in perm.iter().enumerate() {
                let next = grid.neighbor(prev, axis, 1).expect("periodic axis");
                for r in 0..n {
                    edges[r][k] = gradient[next][r] - gradient[prev][r];
                }
                edges[axis][k] += grid.spacing(axis);
                prev = next;
            }
            sign * linalg::det(n, &edges) > 0.0
        })
    });
    Ok(ok)
}

/// Cloud-in-cell deposit of a point mass on a periodic grid.
fn deposit(grid: &ManifoldGrid, cells: &mut [f64], y: &Vec3, mass: f64) {
    let n = grid.dim();
    let res = grid.resolution();
    let mut base = [0i64; 3];
    let mut frac = [0.0; 3];
    for a in 0..n {
        let c = y[a] / grid.spacing(a);
        let fl = c.floor();
        base[a] = fl as i64;
        frac[a] = c - fl;
    }
    for corner in 0..(1usize << n) {
        let mut weight = mass;
        let mut multi = [0usize; 3];
        for a in 0..n {
            let up = (corner >> a) & 1 == 1;
            weight *= if up { frac[a] } else { 1.0 - frac[a] };
            let len = res[a] as i64;
            multi[a] = (base[a] + up as i64).rem_euclid(len) as usize;
        }
        cells[grid.linear_index(&multi[..n])] += weight;
    }
}

fn sub_points(grid: &ManifoldGrid, i: usize) -> Vec<Vec3> {
    let n = grid.dim();
    let x = grid.point(i);
    let count = SUBSAMPLES.pow(n as u32);
    (0..count)
        .map(|mut s| {
            let mut p = x;
            for a in 0..n {
                let k = s % SUBSAMPLES;
                s /= SUBSAMPLES;
                p[a] += grid.spacing(a) * ((k as f64 + 0.5) / SUBSAMPLES as f64 - 0.5);
            }
            p
        })
        .collect()
}

/// Compares the pushforward `T#μ` with `ρ(t)`.
///
/// Both measures are evaluated on a `4^n` sub-lattice per cell with `T` and
/// `DT = I + D²u` taken from the spline of `u`. The binned figure moves each
/// sub-sample by `T` and deposits it with cloud-in-cell weights against an
/// unmoved reference deposit.
pub fn pushforward_error(problem: &TransportProblem, u: &Potential, t: f64) -> Result<PushforwardReport> {
    let grid = problem.grid();
    let n = grid.dim();
    let map = transport_map(u)?;
    let jac = transport_jacobian(grid, &map);
    let dets: Vec<f64> = jac.iter().map(|j| linalg::det(n, j)).collect();
    let flips = dets.iter().filter(|d| **d <= 0.0).count();
    if flips > 0 {
        return Err(Error::JacobianSignFlip { count: flips });
    }
    let f = problem.mu().log_density();
    let jacobian_sup = (0..grid.len())
        .map(|i| {
            let g = problem.target_log_density(t, &map.target[i]).0;
            (dets[i] * (g - f[i]).exp() - 1.0).abs()
        })
        .fold(0.0, f64::max);

    let spline_u = PeriodicSpline::new(grid, u.values())?;
    let spline_mu = PeriodicSpline::new(grid, &problem.mu().density())?;
    let sub_vol = grid.cell_volume(0) / SUBSAMPLES.pow(n as u32) as f64;
    // Per-cell work runs in parallel; sums are sequential so the result does
    // not depend on thread scheduling.
    let cell_tv: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            sub_points(grid, i)
                .iter()
                .map(|p| {
                    let (_, du, d2u) = spline_u.eval(p);
                    let mut y = *p;
                    let mut dt = d2u;
                    for k in 0..n {
                        y[k] += du[k];
                        dt[k][k] += 1.0;
                    }
                    let moved = problem.target_density(t, &grid.manifold().wrap(&y)) * linalg::det(n, &dt);
                    (spline_mu.value(p) - moved).abs() * sub_vol
                })
                .sum::<f64>()
        })
        .collect();
    let tv = 0.5 * cell_tv.iter().sum::<f64>();
    let moves: Vec<Vec<(Vec3, f64, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            sub_points(grid, i)
                .into_iter()
                .map(|p| {
                    let (_, du, _) = spline_u.eval(&p);
                    let mut y = p;
                    for k in 0..n {
                        y[k] += du[k];
                    }
                    (y, spline_mu.value(&p).max(0.0) * sub_vol, problem.target_density(t, &p) * sub_vol)
                })
                .collect()
        })
        .collect();
    let (mut pushed, mut reference) = (vec![0.0; grid.len()], vec![0.0; grid.len()]);
    for (i, cell) in moves.iter().enumerate() {
        for (p, (y, m, r)) in sub_points(grid, i).iter().zip(cell) {
            deposit(grid, &mut pushed, y, *m);
            deposit(grid, &mut reference, p, *r);
        }
    }
    let (sa, sb) = (pushed.iter().sum::<f64>(), reference.iter().sum::<f64>());
    let binned_tv = 0.5 * pushed.iter().zip(&reference).map(|(a, b)| (a / sa - b / sb).abs()).sum::<f64>();
    Ok(PushforwardReport {
        tv,
        binned_tv,
        jacobian_sup,
        min_jacobian: dets.iter().copied().fold(f64::INFINITY, f64::min),
        injective_on_grid: injective_on_grid(grid, &map.gradient)?,
    })
}
