use std::sync::Arc;

use crate::fields::{path_density, DensityField, PeriodicSpline};
use crate::geometry::ManifoldGrid;
use crate::linalg::{Mat3, Vec3, ZERO33};
use crate::{Error, Result};

/// A source/target pair on a torus grid, with smooth interpolants of both
/// densities so the target log-density can be evaluated off-grid at `T(x)`.
#[derive(Clone, Debug)]
pub struct TransportProblem {
    mu: DensityField,
    nu: DensityField,
    spline_mu: PeriodicSpline,
    spline_nu: PeriodicSpline,
    floor: f64,
}

impl TransportProblem {
    pub fn new(mu: DensityField, nu: DensityField) -> Result<Self> {
        if **mu.grid() != **nu.grid() {
            return Err(Error::GridMismatch);
        }
        if !mu.grid().manifold().is_torus() {
            return Err(Error::UnsupportedManifold(
                "the continuity solver runs on torus grids only".into(),
            ));
        }
        mu.require_normalized()?;
        nu.require_normalized()?;
        let spline_mu = PeriodicSpline::new(mu.grid(), &mu.density())?;
        let spline_nu = PeriodicSpline::new(nu.grid(), &nu.density())?;
        let floor = 1e-3 * mu.min_density().min(nu.min_density());
        Ok(Self { mu, nu, spline_mu, spline_nu, floor })
    }

    pub fn grid(&self) -> &Arc<ManifoldGrid> {
        self.mu.grid()
    }

    pub fn mu(&self) -> &DensityField {
        &self.mu
    }

    pub fn nu(&self) -> &DensityField {
        &self.nu
    }

    /// `ρ(t) = (1-t)μ + tν` on the grid.
    pub fn rho(&self, t: f64) -> Result<DensityField> {
        path_density(&self.mu, &self.nu, t)
    }

    /// Density of `ρ(t)` at an arbitrary point.
    pub fn target_density(&self, t: f64, y: &Vec3) -> f64 {
        let s = (1.0 - t) * self.spline_mu.value(y) + t * self.spline_nu.value(y);
        s.max(self.floor)
    }

    /// Log-density of `ρ(t)` with its gradient and Hessian at `y`. Exact at
    /// grid points; the interpolant is clamped below by a small positive floor.
    pub fn target_log_density(&self, t: f64, y: &Vec3) -> (f64, Vec3, Mat3) {
        let (a, da, ha) = self.spline_mu.eval(y);
        let (b, db, hb) = self.spline_nu.eval(y);
        let n = self.grid().dim();
        let s = (1.0 - t) * a + t * b;
        if s <= self.floor {
            return (self.floor.ln(), [0.0; 3], ZERO33);
        }
        let mut g = [0.0; 3];
        let mut h = ZERO33;
        for i in 0..n {
            g[i] = ((1.0 - t) * da[i] + t * db[i]) / s;
        }
        for i in 0..n {
            for j in 0..n {
                h[i][j] = ((1.0 - t) * ha[i][j] + t * hb[i][j]) / s - g[i] * g[j];
            }
        }
        (s.ln(), g, h)
    }
}
