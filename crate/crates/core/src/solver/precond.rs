use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::geometry::ManifoldGrid;

/// Inverse of `s · Δ_h` on mean-zero periodic grid functions, where `Δ_h` is
/// the second-difference Laplacian and `s > 0` a scale; applied by FFT.
pub struct LaplacePreconditioner {
    dim: usize,
    resolution: [usize; 3],
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// `1 / (s · symbol)`, zero on the constant mode.
    inv_symbol: Vec<f64>,
}

impl LaplacePreconditioner {
    pub fn new(grid: &ManifoldGrid, scale: f64) -> Self {
        let dim = grid.dim();
        let mut resolution = [1usize; 3];
        resolution[..dim].copy_from_slice(&grid.resolution()[..dim]);
        let mut planner = FftPlanner::new();
        let forward = (0..dim).map(|a| planner.plan_fft_forward(resolution[a])).collect();
        let inverse = (0..dim).map(|a| planner.plan_fft_inverse(resolution[a])).collect();
        let inv_symbol = (0..grid.len())
            .map(|i| {
                let m = grid.multi_index(i);
                let mut s = 0.0;
                for a in 0..dim {
                    let h = grid.spacing(a);
                    let k = m[a] as f64 / resolution[a] as f64;
                    s -= 4.0 / (h * h) * (PI * k).sin().powi(2);
                }
                if s == 0.0 {
                    0.0
                } else {
                    1.0 / (scale * s)
                }
            })
            .collect();
        Self { dim, resolution, forward, inverse, inv_symbol }
    }

    fn transform(&self, data: &mut [Complex<f64>], plans: &[Arc<dyn Fft<f64>>]) {
        for a in 0..self.dim {
            let len = self.resolution[a];
            let stride: usize = self.resolution[a + 1..self.dim].iter().product();
            let mut line = vec![Complex::new(0.0, 0.0); len];
            for start in 0..data.len() {
                if !(start / stride).is_multiple_of(len) {
                    continue;
                }
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + k * stride];
                }
                plans[a].process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[start + k * stride] = *v;
                }
            }
        }
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut data: Vec<Complex<f64>> = r.iter().map(|v| Complex::new(*v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data.iter_mut().zip(&self.inv_symbol).for_each(|(d, s)| *d *= *s);
        self.transform(&mut data, &self.inverse);
        let norm = data.len() as f64;
        data.iter().map(|c| c.re / norm).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::fd_hessian;
    use crate::geometry::Manifold;

    #[test]
    fn inverts_discrete_laplacian_on_mean_zero_data() {
        let g = ManifoldGrid::new(Manifold::torus(&[6.0, 9.0]), &[12, 18]).unwrap();
        let z: Vec<f64> = g.points().iter().map(|x| (x[0] * 1.3).sin() * (x[1] * 0.7).cos() + 0.2 * x[1].sin()).collect();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let z: Vec<f64> = z.iter().map(|v| v - mean).collect();
        let lap: Vec<f64> = fd_hessian(&g, &z).iter().map(|h| 2.0 * (h[0][0] + h[1][1])).collect();
        let back = LaplacePreconditioner::new(&g, 2.0).apply(&lap);
        for (a, b) in back.iter().zip(&z) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
