//! From a potential `u` to the transport map `T(x) = exp_x(∇u)`, the metric
//! `w_ij = u_ij + c_ij(x, T(x))`, the Monge-Ampere residual and pushforward
//! diagnostics.

mod pointwise;
mod problem;
mod pushforward;

pub use pointwise::{pointwise_linearization, pointwise_residual, PointLinearization};
pub use problem::TransportProblem;
pub use pushforward::{injective_on_grid, pushforward_error, PushforwardReport};

use rayon::prelude::*;

use crate::fields::{frame_derivatives, Potential};
use crate::geometry::{CostTensors, ManifoldGrid};
use crate::linalg::{self, Mat3, Vec3, ZERO3, ZERO33};
use crate::{Error, Result};

/// Smallest eigenvalue of `w` accepted as positive definite.
pub const MIN_EIG_W: f64 = 1e-8;

/// The transport map of a potential.
#[derive(Clone, Debug)]
pub struct MapField {
    /// `∇u` in the orthonormal frame at each grid point.
    pub gradient: Vec<Vec3>,
    /// Covariant Hessian of `u` in the same frame.
    pub hessian: Vec<Mat3>,
    /// `T(x)` in chart coordinates.
    pub target: Vec<Vec3>,
    /// `d(x, T(x))`.
    pub displacement: Vec<f64>,
}

impl MapField {
    pub fn max_displacement(&self) -> f64 {
        self.displacement.iter().copied().fold(0.0, f64::max)
    }

    /// `max |Du(x) + D_x c(x, T(x))|`, which vanishes for `T = exp(∇u)`.
    pub fn first_order_residual(&self, grid: &ManifoldGrid) -> Result<f64> {
        let m = grid.manifold();
        let n = grid.dim();
        let mut worst: f64 = 0.0;
        for i in 0..grid.len() {
            let ct = m.cost_tensors(&grid.point(i), &self.target[i])?;
            for a in 0..n {
                worst = worst.max((self.gradient[i][a] + ct.c_x[a]).abs());
            }
        }
        Ok(worst)
    }
}

/// `T(x) = exp_x(∇u(x))` with the cut-locus guard `|∇u| < ι/2`.
pub fn transport_map(u: &Potential) -> Result<MapField> {
    let grid = u.grid();
    let m = grid.manifold();
    let n = grid.dim();
    let limit = m.injectivity_radius() / 2.0;
    let (gradient, hessian) = frame_derivatives(grid, u.values());
    let mut target = Vec::with_capacity(grid.len());
    let mut displacement = Vec::with_capacity(grid.len());
    for (i, g) in gradient.iter().enumerate() {
        let d = linalg::norm(n, g);
        if d >= limit {
            return Err(Error::DisplacementTooLarge { displacement: d, limit });
        }
        target.push(m.exp(&grid.point(i), g)?);
        displacement.push(d);
    }
    Ok(MapField { gradient, hessian, target, displacement })
}

#[derive(Clone, Debug)]
pub struct WField {
    pub w: Vec<Mat3>,
    pub min_eig: Vec<f64>,
    pub max_eig: Vec<f64>,
    pub positive_definite: Vec<bool>,
    /// Cost derivatives at `(x, T(x))`.
    pub tensors: Vec<CostTensors>,
}

impl WField {
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eig.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Λ_max`, the largest eigenvalue of `w` over the grid.
    pub fn lambda_max(&self) -> f64 {
        self.max_eig.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_positive(&self) -> bool {
        self.positive_definite.iter().all(|p| *p)
    }

    pub fn require_positive(&self) -> Result<()> {
        let count = self.positive_definite.iter().filter(|p| !**p).count();
        if count > 0 {
            Err(Error::NotCConvex { count, min_eig: self.min_eigenvalue() })
        } else {
            Ok(())
        }
    }
}

/// Assembles `w_ij = u_ij + c_ij(x, T(x))`; non-positive points are flagged.
pub fn hessian_metric(grid: &ManifoldGrid, map: &MapField) -> Result<WField> {
    let m = grid.manifold();
    let n = grid.dim();
    let len = grid.len();
    let mut out = WField {
        w: Vec::with_capacity(len),
        min_eig: Vec::with_capacity(len),
        max_eig: Vec::with_capacity(len),
        positive_definite: Vec::with_capacity(len),
        tensors: Vec::with_capacity(len),
    };
    for i in 0..len {
        let ct = m.cost_tensors(&grid.point(i), &map.target[i])?;
        let w = linalg::add(n, &map.hessian[i], &ct.c_xx);
        let (vals, _) = linalg::sym_eigen(n, &w);
        out.min_eig.push(vals[0]);
        out.max_eig.push(vals[n - 1]);
        out.positive_definite.push(vals[0] >= MIN_EIG_W);
        out.w.push(w);
        out.tensors.push(ct);
    }
    Ok(out)
}

/// Frame Jacobian `T^{s̄}_j` of the map by finite differences: derivative
/// along the frame direction `j` at `x`, in the frame at `T(x)`.
pub fn transport_jacobian(grid: &ManifoldGrid, map: &MapField) -> Vec<Mat3> {
    let m = grid.manifold();
    let n = grid.dim();
    let mut out = vec![ZERO33; grid.len()];
    for (i, jac) in out.iter_mut().enumerate() {
        let x = grid.point(i);
        let y = map.target[i];
        let scale = m.chart_metric(&x);
        for a in 0..n {
            let h = grid.spacing(a);
            let lg = |k: usize| m.log(&y, &map.target[k]);
            let d = match (grid.neighbor(i, a, -1), grid.neighbor(i, a, 1)) {
                (Some(lo), Some(hi)) => {
                    let (p, q) = (lg(hi), lg(lo));
                    let mut d = ZERO3;
                    for s in 0..n {
                        d[s] = (p[s] - q[s]) / (2.0 * h);
                    }
                    d
                }
                (None, Some(hi)) => {
                    let hi2 = grid.neighbor(i, a, 2).expect("axis too short");
                    let (p, q) = (lg(hi), lg(hi2));
                    let mut d = ZERO3;
                    for s in 0..n {
                        d[s] = (4.0 * p[s] - q[s]) / (2.0 * h);
                    }
                    d
                }
                (Some(lo), None) => {
                    let lo2 = grid.neighbor(i, a, -2).expect("axis too short");
                    let (p, q) = (lg(lo), lg(lo2));
                    let mut d = ZERO3;
                    for s in 0..n {
                        d[s] = -(4.0 * p[s] - q[s]) / (2.0 * h);
                    }
                    d
                }
                (None, None) => ZERO3,
            };
            for s in 0..n {
                jac[s][a] = d[s] / scale[a].sqrt();
            }
        }
    }
    out
}

/// The dual form `-c_{is̄} T^{s̄}_j` of the metric.
pub fn dual_form_metric(grid: &ManifoldGrid, map: &MapField, wf: &WField) -> Vec<Mat3> {
    let n = grid.dim();
    transport_jacobian(grid, map)
        .iter()
        .zip(&wf.tensors)
        .map(|(jac, ct)| linalg::scale(n, &linalg::mat_mul(n, &ct.c_xy, jac), -1.0))
        .collect()
}

/// `log det w - ζ - log det DT` at every grid point; zero up to
/// discretization error for any `u`.
pub fn det_identity_residual(grid: &ManifoldGrid, map: &MapField, wf: &WField) -> Vec<f64> {
    let n = grid.dim();
    transport_jacobian(grid, map)
        .iter()
        .zip(&wf.w)
        .zip(&wf.tensors)
        .map(|((jac, w), ct)| linalg::det(n, w).ln() - ct.zeta - linalg::det(n, jac).ln())
        .collect()
}

/// Finite-difference gradient and Hessian (frame components) at grid point
/// `idx` of `x ↦ u(x) + c(x, T(x₀))`, which should equal `0` and `w(x₀)`.
pub fn metric_interpretation(u: &Potential, map: &MapField, idx: usize) -> (Vec3, Mat3) {
    let grid = u.grid();
    let m = grid.manifold();
    let y0 = map.target[idx];
    let phi: Vec<f64> = (0..grid.len())
        .map(|k| {
            let d = m.distance(&grid.point(k), &y0);
            u.values()[k] + 0.5 * d * d
        })
        .collect();
    let (fg, fh) = frame_derivatives(grid, &phi);
    (fg[idx], fh[idx])
}

/// Everything the Newton iteration needs at one `(u, t)`.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub map: MapField,
    pub points: Vec<PointLinearization>,
}

impl Assembly {
    pub fn residual(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.residual).collect()
    }

    pub fn residual_norm(&self) -> f64 {
        self.points.iter().map(|p| p.residual.abs()).fold(0.0, f64::max)
    }

    pub fn min_eig(&self) -> f64 {
        self.points.iter().map(|p| p.min_eig).fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_max(&self) -> f64 {
        self.points.iter().map(|p| p.max_eig).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Residual and pointwise linearization of `F(u, t)` over the grid.
pub fn assemble(problem: &TransportProblem, u: &Potential, t: f64) -> Result<Assembly> {
    if **u.grid() != **problem.grid() {
        return Err(Error::GridMismatch);
    }
    let map = transport_map(u)?;
    let grid = problem.grid();
    let m = grid.manifold();
    let f = problem.mu().log_density();
    let results: Vec<Result<PointLinearization>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let g = |y: &Vec3| {
                let (v, d, _) = problem.target_log_density(t, y);
                (v, d)
            };
            pointwise_linearization(m, &grid.point(i), f[i], &map.gradient[i], &map.hessian[i], g)
        })
        .collect();
    let mut points = Vec::with_capacity(results.len());
    let (mut bad, mut worst) = (0usize, f64::INFINITY);
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err(Error::NotCConvex { min_eig, .. }) => {
                bad += 1;
                worst = worst.min(min_eig);
            }
            Err(e) => return Err(e),
        }
    }
    if bad > 0 {
        return Err(Error::NotCConvex { count: bad, min_eig: worst });
    }
    Ok(Assembly { map, points })
}

/// `F(u, t)(x) = log det w - ζ(x, T) - f(x) + g_t(T)` on the grid.
pub fn mae_residual(problem: &TransportProblem, u: &Potential, t: f64) -> Result<Vec<f64>> {
    Ok(assemble(problem, u, t)?.residual())
}

#[cfg(test)]
mod tests;
