//! Geodesics and the transport map on the equatorial band of the sphere.
//! Checks `det w · e^{-ζ} = det DT` and that `w` is the Hessian of
//! `u + c(·, T(x₀))` at `x₀`.
//!
//! cargo run --example sphere_geometry

use std::sync::Arc;

use ma_continuity::fields::Potential;
use ma_continuity::geometry::{Manifold, ManifoldGrid};
use ma_continuity::transport::{det_identity_residual, hessian_metric, metric_interpretation, transport_map};

fn main() -> ma_continuity::Result<()> {
    let m = Manifold::sphere_chart(1.0, 0.5)?;
    let (x, y) = ([0.3, 0.2, 0.0], [1.1, -0.4, 0.0]);
    let v = m.log(&x, &y);
    println!("d(x, y) = {:.12}, |log_x y| = {:.12}", m.distance(&x, &y), v[0].hypot(v[1]));
    let back = m.exp(&x, &v)?;
    println!("exp_x(log_x y) - y = ({:.1e}, {:.1e})", back[0] - y[0], back[1] - y[1]);
    let ct = m.cost_tensors(&x, &y)?;
    println!("c_xx = [[{:.5}, {:.5}], [{:.5}, {:.5}]], ζ = {:.5}", ct.c_xx[0][0], ct.c_xx[0][1], ct.c_xx[1][0], ct.c_xx[1][1], ct.zeta);

    let grid = Arc::new(ManifoldGrid::new(m, &[96, 48])?);
    let u = Potential::new(
        grid.clone(),
        grid.points().iter().map(|p| 0.05 * (p[0].sin() * (2.0 * p[1]).cos() + 0.5 * p[1])).collect(),
    )?;
    let map = transport_map(&u)?;
    let w = hessian_metric(&grid, &map)?;
    let det = det_identity_residual(&grid, &map, &w);
    let interior: Vec<f64> = (0..grid.len())
        .filter(|i| {
            let k = grid.multi_index(*i)[1];
            k > 2 && k + 3 < grid.resolution()[1]
        })
        .map(|i| det[i].abs())
        .collect();
    println!("\nmax displacement {:.4}, min eig w {:.4}", map.max_displacement(), w.min_eigenvalue());
    println!("interior max |log det w - ζ - log det DT| = {:.3e}", interior.iter().copied().fold(0.0, f64::max));
    let idx = grid.linear_index(&[20, 24]);
    let (g, hess) = metric_interpretation(&u, &map, idx);
    println!("at x₀: ∇(u + c(·,T(x₀))) = ({:.1e}, {:.1e})", g[0], g[1]);
    println!("  Hessian {:.5} {:.5} / w {:.5} {:.5}", hess[0][0], hess[1][1], w.w[idx][0][0], w.w[idx][1][1]);
    Ok(())
}
