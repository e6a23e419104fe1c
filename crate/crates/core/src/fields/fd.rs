//! Second-order finite differences on grid functions.
//!
//! Periodic axes use centered stencils with wrap-around; the latitude axis of
//! the sphere chart switches to one-sided second-order stencils at its edges.
//! Mixed partials are the composition of two centered first differences, so
//! the Hessian is symmetric by construction.

use crate::geometry::ManifoldGrid;
use crate::linalg::{sym_operator_norm, Mat3, Vec3, ZERO3, ZERO33};

/// First partial along one axis (chart coordinates).
pub fn fd_partial(grid: &ManifoldGrid, values: &[f64], axis: usize) -> Vec<f64> {
    let h = grid.spacing(axis);
    (0..grid.len())
        .map(|i| match (grid.neighbor(i, axis, -1), grid.neighbor(i, axis, 1)) {
            (Some(m), Some(p)) => (values[p] - values[m]) / (2.0 * h),
            (None, Some(p)) => {
                let p2 = grid.neighbor(i, axis, 2).expect("axis too short");
                (-3.0 * values[i] + 4.0 * values[p] - values[p2]) / (2.0 * h)
            }
            (Some(m), None) => {
                let m2 = grid.neighbor(i, axis, -2).expect("axis too short");
                (3.0 * values[i] - 4.0 * values[m] + values[m2]) / (2.0 * h)
            }
            (None, None) => 0.0,
        })
        .collect()
}

/// Unmixed second partial along one axis.
pub fn fd_second_partial(grid: &ManifoldGrid, values: &[f64], axis: usize) -> Vec<f64> {
    let h2 = grid.spacing(axis).powi(2);
    (0..grid.len())
        .map(|i| match (grid.neighbor(i, axis, -1), grid.neighbor(i, axis, 1)) {
            (Some(m), Some(p)) => (values[p] - 2.0 * values[i] + values[m]) / h2,
            (None, Some(p)) => {
                let p2 = grid.neighbor(i, axis, 2).expect("axis too short");
                let p3 = grid.neighbor(i, axis, 3).expect("axis too short");
                (2.0 * values[i] - 5.0 * values[p] + 4.0 * values[p2] - values[p3]) / h2
            }
            (Some(m), None) => {
                let m2 = grid.neighbor(i, axis, -2).expect("axis too short");
                let m3 = grid.neighbor(i, axis, -3).expect("axis too short");
                (2.0 * values[i] - 5.0 * values[m] + 4.0 * values[m2] - values[m3]) / h2
            }
            (None, None) => 0.0,
        })
        .collect()
}

/// Chart gradient `∂_a u` at every grid point.
pub fn fd_gradient(grid: &ManifoldGrid, values: &[f64]) -> Vec<Vec3> {
    let n = grid.dim();
    let parts: Vec<Vec<f64>> = (0..n).map(|a| fd_partial(grid, values, a)).collect();
    (0..grid.len())
        .map(|i| {
            let mut g = ZERO3;
            for a in 0..n {
                g[a] = parts[a][i];
            }
            g
        })
        .collect()
}

/// Chart Hessian `∂_a ∂_b u` at every grid point.
pub fn fd_hessian(grid: &ManifoldGrid, values: &[f64]) -> Vec<Mat3> {
    let n = grid.dim();
    let mut out = vec![ZERO33; grid.len()];
    for a in 0..n {
        let d2 = fd_second_partial(grid, values, a);
        for (h, v) in out.iter_mut().zip(&d2) {
            h[a][a] = *v;
        }
        let da = fd_partial(grid, values, a);
        for b in a + 1..n {
            let dab = fd_partial(grid, &da, b);
            for (h, v) in out.iter_mut().zip(&dab) {
                h[a][b] = *v;
                h[b][a] = *v;
            }
        }
    }
    out
}

/// Gradient and covariant Hessian in the orthonormal frame at each point.
pub fn frame_derivatives(grid: &ManifoldGrid, values: &[f64]) -> (Vec<Vec3>, Vec<Mat3>) {
    let grads = fd_gradient(grid, values);
    let hess = fd_hessian(grid, values);
    let m = grid.manifold();
    let mut fg = Vec::with_capacity(grid.len());
    let mut fh = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let x = grid.point(i);
        fg.push(m.frame_gradient(&x, &grads[i]));
        fh.push(m.frame_hessian(&x, &grads[i], &hess[i]));
    }
    (fg, fh)
}

/// `max(|f|, |Df|_{g₀}, |D²f|_{g₀})` over the grid.
pub fn c2_norm(grid: &ManifoldGrid, values: &[f64]) -> f64 {
    let n = grid.dim();
    let (grads, hess) = frame_derivatives(grid, values);
    let mut m: f64 = 0.0;
    for i in 0..grid.len() {
        m = m.max(values[i].abs());
        m = m.max(crate::linalg::norm(n, &grads[i]));
        m = m.max(sym_operator_norm(n, &hess[i]));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Manifold;
    use std::f64::consts::PI;

    #[test]
    fn constants_have_zero_derivatives() {
        let g = ManifoldGrid::new(Manifold::torus(&[5.0, 7.0]), &[9, 12]).unwrap();
        let v = vec![3.5; g.len()];
        assert!(fd_gradient(&g, &v).iter().all(|x| x.iter().all(|c| *c == 0.0)));
        assert!(fd_hessian(&g, &v).iter().all(|m| m.iter().flatten().all(|c| *c == 0.0)));
    }

    fn cos_gradient_error(n: usize) -> f64 {
        let p = 8.0;
        let g = ManifoldGrid::new(Manifold::torus(&[p]), &[n]).unwrap();
        let v: Vec<f64> = g.points().iter().map(|x| (2.0 * PI * x[0] / p).cos()).collect();
        let d = fd_gradient(&g, &v);
        g.points()
            .iter()
            .zip(&d)
            .map(|(x, d)| (d[0] + 2.0 * PI / p * (2.0 * PI * x[0] / p).sin()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradient_converges_at_second_order() {
        let e1 = cos_gradient_error(32);
        let e2 = cos_gradient_error(64);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.1, "observed order {order}");
    }

    #[test]
    fn sphere_mixed_partial_of_xy() {
        let g = ManifoldGrid::new(Manifold::sphere_chart(1.0, 1.3).unwrap(), &[32, 16]).unwrap();
        let v: Vec<f64> = g.points().iter().map(|x| x[0] * x[1]).collect();
        let h = fd_hessian(&g, &v);
        let res = g.resolution().to_vec();
        for i in 0..g.len() {
            let m = g.multi_index(i);
            if m[0] >= 1 && m[0] + 1 < res[0] {
                assert!((h[i][0][1] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn affine_latitude_profile_is_exact_up_to_edges() {
        let g = ManifoldGrid::new(Manifold::sphere_chart(1.0, 1.3).unwrap(), &[16, 12]).unwrap();
        let v: Vec<f64> = g.points().iter().map(|x| 2.0 - 3.0 * x[1]).collect();
        let d = fd_gradient(&g, &v);
        let h = fd_hessian(&g, &v);
        for i in 0..g.len() {
            assert!((d[i][1] + 3.0).abs() < 1e-12 && d[i][0].abs() < 1e-12);
            assert!(h[i].iter().flatten().all(|c| c.abs() < 1e-10));
        }
    }

    #[test]
    fn c2_norm_examples() {
        let g = ManifoldGrid::new(Manifold::torus(&[8.0]), &[64]).unwrap();
        assert_eq!(c2_norm(&g, &vec![0.0; 64]), 0.0);
        let a = 0.7;
        let v: Vec<f64> = g.points().iter().map(|x| a * (2.0 * PI * x[0] / 8.0).cos()).collect();
        assert!((c2_norm(&g, &v) - a).abs() < 1e-12);

        let g = ManifoldGrid::new(Manifold::torus(&[8.0, 8.0]), &[32, 32]).unwrap();
        let mut v = vec![0.0; g.len()];
        let s = 0.3;
        v[g.linear_index(&[5, 7])] = s;
        let h = g.spacing(0);
        // Compact second difference at the spike; mixed stencils vanish there.
        assert!((c2_norm(&g, &v) - 2.0 * s / (h * h)).abs() < 1e-12);
    }
}
