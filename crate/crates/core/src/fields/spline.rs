//! Periodic cubic B-spline interpolation on torus grids.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::geometry::ManifoldGrid;
use crate::linalg::{Mat3, Vec3, ZERO3, ZERO33};
use crate::{Error, Result};

/// Interpolating periodic cubic spline of a grid function: `C²`, exact at
/// grid points, fourth-order accurate for smooth data.
#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    dim: usize,
    resolution: [usize; 3],
    spacing: [f64; 3],
    coeffs: Vec<f64>,
}

fn weights(t: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    let s = 1.0 - t;
    (
        [s * s * s / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0, (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0, t3 / 6.0],
        [-s * s / 2.0, (3.0 * t2 - 4.0 * t) / 2.0, (-3.0 * t2 + 2.0 * t + 1.0) / 2.0, t2 / 2.0],
        [s, 3.0 * t - 2.0, -3.0 * t + 1.0, t],
    )
}

impl PeriodicSpline {
    pub fn new(grid: &ManifoldGrid, values: &[f64]) -> Result<Self> {
        if !grid.manifold().is_torus() {
            return Err(Error::UnsupportedManifold("periodic spline needs a torus grid".into()));
        }
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let dim = grid.dim();
        let mut resolution = [1usize; 3];
        let mut spacing = [1.0; 3];
        for a in 0..dim {
            resolution[a] = grid.resolution()[a];
            spacing[a] = grid.spacing(a);
        }
        let mut coeffs = values.to_vec();
        let mut planner = FftPlanner::<f64>::new();
        for a in 0..dim {
            let len = resolution[a];
            let stride: usize = resolution[a + 1..dim].iter().product();
            let fwd = planner.plan_fft_forward(len);
            let inv = planner.plan_fft_inverse(len);
            let symbol: Vec<f64> = (0..len)
                .map(|k| (4.0 + 2.0 * (2.0 * std::f64::consts::PI * k as f64 / len as f64).cos()) / 6.0)
                .collect();
            let mut line = vec![Complex::new(0.0, 0.0); len];
            for start in 0..coeffs.len() {
                // Visit each line once: its first element has axis index 0.
                if !(start / stride).is_multiple_of(len) {
                    continue;
                }
                for (k, c) in line.iter_mut().enumerate() {
                    *c = Complex::new(coeffs[start + k * stride], 0.0);
                }
                fwd.process(&mut line);
                for (c, s) in line.iter_mut().zip(&symbol) {
                    *c /= *s * len as f64;
                }
                inv.process(&mut line);
                for (k, c) in line.iter().enumerate() {
                    coeffs[start + k * stride] = c.re;
                }
            }
        }
        Ok(Self { dim, resolution, spacing, coeffs })
    }

    fn coeff(&self, idx: &[isize; 3]) -> f64 {
        let mut lin = 0usize;
        for a in 0..self.dim {
            let r = self.resolution[a] as isize;
            lin = lin * self.resolution[a] + idx[a].rem_euclid(r) as usize;
        }
        self.coeffs[lin]
    }

    /// Value, gradient and Hessian at a chart point.
    pub fn eval(&self, x: &Vec3) -> (f64, Vec3, Mat3) {
        let n = self.dim;
        let mut base = [0isize; 3];
        let mut w = [[[0.0; 4]; 3]; 3];
        for a in 0..n {
            let s = x[a] / self.spacing[a];
            let fl = s.floor();
            base[a] = fl as isize - 1;
            let (w0, w1, w2) = weights(s - fl);
            let h = self.spacing[a];
            for k in 0..4 {
                w[a][0][k] = w0[k];
                w[a][1][k] = w1[k] / h;
                w[a][2][k] = w2[k] / (h * h);
            }
        }
        let mut val = 0.0;
        let mut grad = ZERO3;
        let mut hess = ZERO33;
        let count = 4usize.pow(n as u32);
        for flat in 0..count {
            let mut off = [0usize; 3];
            let mut rem = flat;
            for o in off.iter_mut().take(n) {
                *o = rem % 4;
                rem /= 4;
            }
            let mut idx = [0isize; 3];
            for a in 0..n {
                idx[a] = base[a] + off[a] as isize;
            }
            let c = self.coeff(&idx);
            // Product of per-axis weights with derivative orders `ord`.
            let prod = |ord: [usize; 3]| (0..n).map(|a| w[a][ord[a]][off[a]]).product::<f64>();
            val += c * prod([0, 0, 0]);
            for a in 0..n {
                let mut o = [0usize; 3];
                o[a] = 1;
                grad[a] += c * prod(o);
                for b in a..n {
                    let mut o = [0usize; 3];
                    o[a] += 1;
                    o[b] += 1;
                    hess[a][b] += c * prod(o);
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                hess[a][b] = hess[b][a];
            }
        }
        (val, grad, hess)
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        self.eval(x).0
    }
}
