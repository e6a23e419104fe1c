//! Round sphere of radius `R` in the chart `(R·lon, R·lat)`, computed through
//! the embedding in `R³`.

use std::f64::consts::PI;

use super::cost::{CostTensors, Tensor3, Tensor4};
use crate::linalg::{Mat3, Vec3, ZERO3, ZERO33};

type V = [f64; 3];
type Frame = [V; 2];

/// Step (in length units) for the finite-difference third and fourth
/// derivatives.
const FD_STEP: f64 = 1e-4;

fn dot(a: &V, b: &V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &V, b: &V) -> V {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn axpy(a: f64, x: &V, y: &V) -> V {
    [a * x[0] + y[0], a * x[1] + y[1], a * x[2] + y[2]]
}

fn scaled(a: f64, x: &V) -> V {
    [a * x[0], a * x[1], a * x[2]]
}

fn unit(x: &V) -> V {
    let n = dot(x, x).sqrt();
    scaled(1.0 / n, x)
}

fn embed(r: f64, x: &Vec3) -> V {
    let (lon, lat) = (x[0] / r, x[1] / r);
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

fn chart(r: f64, p: &V) -> Vec3 {
    let lon = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
    let lat = p[2].clamp(-1.0, 1.0).asin();
    [r * lon, r * lat, 0.0]
}

/// East/north orthonormal frame at a chart point.
fn frame(r: f64, x: &Vec3) -> Frame {
    let (lon, lat) = (x[0] / r, x[1] / r);
    let (sl, cl) = lon.sin_cos();
    let (sp, cp) = lat.sin_cos();
    [[-sl, cl, 0.0], [-sp * cl, -sp * sl, cp]]
}

fn angle(p: &V, q: &V) -> f64 {
    let c = cross(p, q);
    dot(&c, &c).sqrt().atan2(dot(p, q))
}

/// Unit initial direction of the minimizing geodesic from `p` to `q`.
fn direction(p: &V, q: &V, fallback: &V) -> V {
    let d = axpy(-dot(p, q), p, q);
    let d = axpy(-dot(&d, p), p, &d);
    let n = dot(&d, &d).sqrt();
    if n < 1e-14 {
        *fallback
    } else {
        scaled(1.0 / n, &d)
    }
}

pub(super) fn distance(r: f64, x: &Vec3, y: &Vec3) -> f64 {
    r * angle(&embed(r, x), &embed(r, y))
}

pub(super) fn log(r: f64, x: &Vec3, y: &Vec3) -> Vec3 {
    let (p, q) = (embed(r, x), embed(r, y));
    let theta = angle(&p, &q);
    if theta == 0.0 {
        return ZERO3;
    }
    let f = frame(r, x);
    let v = direction(&p, &q, &f[0]);
    [r * theta * dot(&v, &f[0]), r * theta * dot(&v, &f[1]), 0.0]
}

pub(super) fn exp(r: f64, x: &Vec3, v: &Vec3) -> Vec3 {
    let f = frame(r, x);
    let tangent = axpy(v[0], &f[0], &scaled(v[1], &f[1]));
    let s = dot(&tangent, &tangent).sqrt();
    if s == 0.0 {
        return *x;
    }
    let a = s / r;
    let p = embed(r, x);
    let q = axpy(a.cos(), &p, &scaled(a.sin() / s, &tangent));
    chart(r, &unit(&q))
}

/// Moves `p` by angle `alpha` along the unit tangent `u` and parallel
/// transports `frame` along the way.
fn shift(p: &V, u: &V, alpha: f64, frame: &Frame) -> (V, Frame) {
    let (s, c) = alpha.sin_cos();
    let q = unit(&axpy(c, p, &scaled(s, u)));
    let transport = |a: &V| {
        let au = dot(a, u);
        let corr = axpy(c - 1.0, u, &scaled(-s, p));
        axpy(au, &corr, a)
    };
    (q, [transport(&frame[0]), transport(&frame[1])])
}

/// Order-two data in arbitrary orthonormal frames at `p` and `q`:
/// `(c_ij, c_{is̄}, ζ)`.
fn second_order(p: &V, q: &V, fx: &Frame, fy: &Frame) -> ([[f64; 2]; 2], [[f64; 2]; 2], f64) {
    let theta = angle(p, q);
    let vx = direction(p, q, &fx[0]);
    let n = unit(&cross(p, &vx));
    let vy = axpy(-theta.sin(), p, &scaled(theta.cos(), &vx));
    let (tcot, tsin) = if theta < 1e-6 {
        (1.0 - theta * theta / 3.0, 1.0 + theta * theta / 6.0)
    } else {
        (theta / theta.tan(), theta / theta.sin())
    };
    let mut cxx = [[0.0; 2]; 2];
    let mut cxy = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            cxx[i][j] = dot(&fx[i], &vx) * dot(&fx[j], &vx) + tcot * dot(&fx[i], &n) * dot(&fx[j], &n);
            cxy[i][j] = -(dot(&fx[i], &vx) * dot(&fy[j], &vy) + tsin * dot(&fx[i], &n) * dot(&fy[j], &n));
        }
    }
    (cxx, cxy, tsin.ln())
}

fn central<T, F>(r: f64, base: &V, frame: &Frame, k: usize, eval: F) -> (T, T)
where
    F: Fn(&V, &Frame) -> T,
{
    let a = FD_STEP / r;
    let (pp, fp) = shift(base, &frame[k], a, frame);
    let (pm, fm) = shift(base, &frame[k], -a, frame);
    (eval(&pp, &fp), eval(&pm, &fm))
}

fn c_xxy_at(r: f64, p: &V, q: &V, fx: &Frame, fy: &Frame) -> [[[f64; 2]; 2]; 2] {
    let mut out = [[[0.0; 2]; 2]; 2];
    for s in 0..2 {
        let (plus, minus) = central(r, q, fy, s, |qq, ff| second_order(p, qq, fx, ff).0);
        for i in 0..2 {
            for j in 0..2 {
                out[i][j][s] = (plus[i][j] - minus[i][j]) / (2.0 * FD_STEP);
            }
        }
    }
    out
}

pub(super) fn cost_tensors(r: f64, x: &Vec3, y: &Vec3) -> CostTensors {
    let (p, q) = (embed(r, x), embed(r, y));
    let (fx, fy) = (frame(r, x), frame(r, y));
    let (cxx, cxy, zeta) = second_order(&p, &q, &fx, &fy);
    let lg = log(r, x, y);

    let mut c_xx = ZERO33;
    let mut c_xy: Mat3 = ZERO33;
    for i in 0..2 {
        for j in 0..2 {
            c_xx[i][j] = cxx[i][j];
            c_xy[i][j] = cxy[i][j];
        }
    }

    let mut c_xxx = Tensor3::default();
    let mut c_xxy = Tensor3::default();
    let mut c_xyy = Tensor3::default();
    let mut c_xxyy = Tensor4::default();
    let mut zeta_x = ZERO3;
    let mut zeta_y = ZERO3;
    let h2 = 2.0 * FD_STEP;

    for k in 0..2 {
        let (plus, minus) = central(r, &p, &fx, k, |pp, ff| second_order(pp, &q, ff, &fy));
        zeta_x[k] = (plus.2 - minus.2) / h2;
        for i in 0..2 {
            for j in 0..2 {
                c_xxx[(i, j, k)] = (plus.0[i][j] - minus.0[i][j]) / h2;
            }
        }
        let (plus, minus) = central(r, &q, &fy, k, |qq, ff| second_order(&p, qq, &fx, ff));
        zeta_y[k] = (plus.2 - minus.2) / h2;
        for i in 0..2 {
            for j in 0..2 {
                c_xxy[(i, j, k)] = (plus.0[i][j] - minus.0[i][j]) / h2;
                c_xyy[(i, j, k)] = (plus.1[i][j] - minus.1[i][j]) / h2;
            }
        }
        let (plus, minus) = central(r, &q, &fy, k, |qq, ff| c_xxy_at(r, &p, qq, &fx, ff));
        for i in 0..2 {
            for j in 0..2 {
                for s in 0..2 {
                    c_xxyy[(i, j, s, k)] = (plus[i][j][s] - minus[i][j][s]) / h2;
                }
            }
        }
    }

    CostTensors {
        dim: 2,
        c_x: [-lg[0], -lg[1], 0.0],
        c_xx,
        c_xy,
        c_xxx,
        c_xxy,
        c_xyy,
        c_xxyy,
        zeta,
        zeta_x,
        zeta_y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: partial derivatives of d²/2 in the chart, converted
    /// to orthonormal frames at the diagonal-free pair below.
    #[test]
    fn second_order_matches_chart_differences() {
        let r = 1.7;
        let x = [0.4, 0.2, 0.0];
        let y = [1.3, -0.3, 0.0];
        let c = |a: &Vec3, b: &Vec3| 0.5 * distance(r, a, b).powi(2);
        let ct = cost_tensors(r, &x, &y);
        let h = 1e-4;
        let sx = [(x[1] / r).cos(), 1.0];
        let sy = [(y[1] / r).cos(), 1.0];
        let e = |i: usize, t: f64| {
            let mut v = [0.0; 3];
            v[i] = t;
            v
        };
        let add = |a: &Vec3, b: &Vec3| [a[0] + b[0], a[1] + b[1], 0.0];
        for i in 0..2 {
            for j in 0..2 {
                let m = (c(&add(&x, &e(i, h)), &add(&y, &e(j, h))) - c(&add(&x, &e(i, h)), &add(&y, &e(j, -h)))
                    - c(&add(&x, &e(i, -h)), &add(&y, &e(j, h)))
                    + c(&add(&x, &e(i, -h)), &add(&y, &e(j, -h))))
                    / (4.0 * h * h);
                assert!((m / (sx[i] * sy[j]) - ct.c_xy[i][j]).abs() < 1e-5, "c_xy[{i}][{j}]");
            }
            let g = (c(&add(&x, &e(i, h)), &y) - c(&add(&x, &e(i, -h)), &y)) / (2.0 * h);
            assert!((g / sx[i] - ct.c_x[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn zeta_is_log_theta_over_sin() {
        let r = 2.0;
        let x = [0.0, 0.0, 0.0];
        let y = [1.0, 0.0, 0.0];
        let ct = cost_tensors(r, &x, &y);
        let t: f64 = 0.5;
        assert!((ct.zeta - (t / t.sin()).ln()).abs() < 1e-14);
        let det = ct.c_xy[0][0] * ct.c_xy[1][1] - ct.c_xy[0][1] * ct.c_xy[1][0];
        assert!((det.ln() - ct.zeta).abs() < 1e-12);
    }

    /// `c_{ijs̄}` computed as a y-derivative of `c_ij` must agree with the
    /// x-derivative of `c_{is̄}`.
    #[test]
    fn mixed_third_derivatives_commute() {
        let r = 1.0;
        let x = [0.5, 0.1, 0.0];
        let y = [1.2, -0.2, 0.0];
        let ct = cost_tensors(r, &x, &y);
        let (p, q) = (embed(r, &x), embed(r, &y));
        let (fx, fy) = (frame(r, &x), frame(r, &y));
        for j in 0..2 {
            let (plus, minus) = central(r, &p, &fx, j, |pp, ff| second_order(pp, &q, ff, &fy).1);
            for i in 0..2 {
                for s in 0..2 {
                    let alt = (plus[i][s] - minus[i][s]) / (2.0 * FD_STEP);
                    assert!((alt - ct.c_xxy[(i, j, s)]).abs() < 1e-6);
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                for s in 0..2 {
                    for t in 0..2 {
                        let d = ct.c_xxyy[(i, j, s, t)] - ct.c_xxyy[(i, j, t, s)];
                        assert!(d.abs() < 1e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn transported_frame_stays_orthonormal() {
        let p = embed(1.0, &[0.3, 0.4, 0.0]);
        let f = frame(1.0, &[0.3, 0.4, 0.0]);
        let (q, g) = shift(&p, &f[0], 0.7, &f);
        for a in &g {
            assert!(dot(a, &q).abs() < 1e-14);
            assert!((dot(a, a) - 1.0).abs() < 1e-14);
        }
        assert!(dot(&g[0], &g[1]).abs() < 1e-14);
    }
}
