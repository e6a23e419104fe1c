use serde::{Deserialize, Serialize};

use crate::geometry::{ManifoldGrid, CHART_LOWER, CHART_UPPER};
use crate::linalg::{self, Mat3, Vec3};

/// `Λ(x) = max_{|e|=1} w(e, e)` with its global maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaField {
    pub values: Vec<f64>,
    pub max: f64,
    /// Lowest grid index attaining the maximum.
    pub argmax: usize,
    /// Unit maximizing direction (frame components) at `argmax`.
    pub direction: Vec3,
}

/// `w` is given in orthonormal frame components, so `Λ` is its top
/// eigenvalue.
pub fn lambda_field(grid: &ManifoldGrid, w: &[Mat3]) -> LambdaField {
    let n = grid.dim();
    let values: Vec<f64> = w.iter().map(|m| linalg::max_eigenvalue(n, m)).collect();
    let mut argmax = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[argmax] {
            argmax = i;
        }
    }
    let (_, direction) = linalg::top_eigenpair(n, &w[argmax]);
    LambdaField { max: values[argmax], values, argmax, direction }
}

fn chart_matrix(grid: &ManifoldGrid, idx: usize, w: &Mat3) -> Mat3 {
    let n = grid.dim();
    let metric = grid.manifold().chart_metric(&grid.point(idx));
    let mut out = *w;
    for i in 0..n {
        for j in 0..n {
            out[i][j] *= (metric[i] * metric[j]).sqrt();
        }
    }
    out
}

/// `|w|(x) = max_i w(∂_i, ∂_i)` in chart coordinates.
pub fn w_abs(grid: &ManifoldGrid, w: &[Mat3]) -> Vec<f64> {
    let n = grid.dim();
    w.iter()
        .enumerate()
        .map(|(i, m)| {
            let c = chart_matrix(grid, i, m);
            (0..n).map(|a| c[a][a]).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// `|w| ≤ 1.1 Λ` and `0.9 · λ_max(chart) ≤ Λ` at every point.
pub fn chart_equivalence_holds(grid: &ManifoldGrid, w: &[Mat3]) -> bool {
    let n = grid.dim();
    let abs = w_abs(grid, w);
    w.iter().enumerate().all(|(i, m)| {
        let lambda = linalg::max_eigenvalue(n, m);
        let chart_top = linalg::max_eigenvalue(n, &chart_matrix(grid, i, m));
        let tol = 1e-12 * lambda.abs().max(1.0);
        abs[i] <= CHART_UPPER * lambda + tol && CHART_LOWER * chart_top <= lambda + tol
    })
}
