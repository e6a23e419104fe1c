use crate::geometry::Manifold;
use crate::linalg::{self, Mat3, Vec3, ZERO3};
use crate::{Error, Result};

use super::MIN_EIG_W;

/// `dF(z) = a : D²z + b · ∇z` at one point, plus the residual `F` itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointLinearization {
    /// `w^{ij}`.
    pub a: Mat3,
    /// Drift acting on `∇z`.
    pub b: Vec3,
    pub residual: f64,
    /// `w_ij` itself.
    pub w: Mat3,
    pub min_eig: f64,
    pub max_eig: f64,
}

struct Jet {
    y: Vec3,
    w: Mat3,
    ct: crate::geometry::CostTensors,
    min_eig: f64,
    max_eig: f64,
}

fn jet(m: &Manifold, x: &Vec3, grad: &Vec3, hess: &Mat3) -> Result<Jet> {
    let n = m.dim();
    let limit = m.injectivity_radius() / 2.0;
    let d = linalg::norm(n, grad);
    if d >= limit {
        return Err(Error::DisplacementTooLarge { displacement: d, limit });
    }
    let y = m.exp(x, grad)?;
    let ct = m.cost_tensors(x, &y)?;
    let w = linalg::add(n, hess, &ct.c_xx);
    let (vals, _) = linalg::sym_eigen(n, &w);
    if vals[0] < MIN_EIG_W {
        return Err(Error::NotCConvex { count: 1, min_eig: vals[0] });
    }
    Ok(Jet { y, w, ct, min_eig: vals[0], max_eig: vals[n - 1] })
}

/// `F = log det w - ζ(x, T) - f(x) + g(T)` from the 2-jet of `u` at `x`
/// (frame components). `g` returns the target log-density and its frame
/// gradient at a point.
pub fn pointwise_residual(
    m: &Manifold,
    x: &Vec3,
    f_x: f64,
    grad: &Vec3,
    hess: &Mat3,
    g: impl Fn(&Vec3) -> (f64, Vec3),
) -> Result<f64> {
    let j = jet(m, x, grad, hess)?;
    Ok(linalg::det(m.dim(), &j.w).ln() - j.ct.zeta - f_x + g(&j.y).0)
}

/// Residual and linearization of `F` at one point.
///
/// Perturbing `u` by `εz` moves the target by `δT^{s̄} = -c^{s̄k} z_k` (from
/// `c_i(x, T) = -u_i`), so
/// `dF(z) = w^{ij}(z_ij - c_{ijs̄} c^{s̄k} z_k) + (ζ_s̄ - g_s̄) c^{s̄k} z_k`.
/// On the flat torus this is `w^{ij} z_ij + g_k(T) z_k`.
pub fn pointwise_linearization(
    m: &Manifold,
    x: &Vec3,
    f_x: f64,
    grad: &Vec3,
    hess: &Mat3,
    g: impl Fn(&Vec3) -> (f64, Vec3),
) -> Result<PointLinearization> {
    let n = m.dim();
    let j = jet(m, x, grad, hess)?;
    let (gv, gg) = g(&j.y);
    let winv = linalg::inverse(n, &j.w).ok_or(Error::NotCConvex { count: 1, min_eig: j.min_eig })?;
    let cinv = linalg::inverse(n, &j.ct.c_xy)
        .ok_or_else(|| Error::ParameterOutOfRange("singular mixed cost derivative".into()))?;
    // d_s = dF/dT^s̄ at fixed D²u.
    let mut dfdt = ZERO3;
    for s in 0..n {
        let mut acc = gg[s] - j.ct.zeta_y[s];
        for a in 0..n {
            for b in 0..n {
                acc += winv[a][b] * j.ct.c_xxy[(a, b, s)];
            }
        }
        dfdt[s] = acc;
    }
    let mut b = ZERO3;
    for k in 0..n {
        b[k] = -(0..n).map(|s| dfdt[s] * cinv[s][k]).sum::<f64>();
    }
    Ok(PointLinearization {
        a: winv,
        b,
        residual: linalg::det(n, &j.w).ln() - j.ct.zeta - f_x + gv,
        w: j.w,
        min_eig: j.min_eig,
        max_eig: j.max_eig,
    })
}
