//! Grid fields: densities, potentials, finite differences and the path of
//! measures `ρ(t) = (1-t)μ + tν`.

mod fd;
mod spec;
mod spline;

pub use fd::{c2_norm, fd_gradient, fd_hessian, fd_partial, fd_second_partial, frame_derivatives};
pub use spec::{density_from_spec, read_density_csv, write_density_csv, DensitySpec};
pub use spline::PeriodicSpline;

use std::sync::Arc;

use crate::geometry::ManifoldGrid;
use crate::{Error, Result};

/// Tolerance for the unit-mass check.
pub const MASS_TOL: f64 = 1e-12;

/// A density `μ = e^f dVol` stored through its log-density `f`.
#[derive(Clone, Debug)]
pub struct DensityField {
    grid: Arc<ManifoldGrid>,
    log_density: Vec<f64>,
    normalized: bool,
    c2_norm: f64,
}

impl DensityField {
    pub fn new(grid: Arc<ManifoldGrid>, log_density: Vec<f64>) -> Result<Self> {
        if log_density.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(v) = log_density.iter().find(|v| !v.is_finite()) {
            return Err(Error::ParameterOutOfRange(format!("log-density value {v}")));
        }
        let c2 = c2_norm(&grid, &log_density);
        let mut field = Self { grid, log_density, normalized: false, c2_norm: c2 };
        field.normalized = (field.mass() - 1.0).abs() <= MASS_TOL;
        Ok(field)
    }

    pub fn grid(&self) -> &Arc<ManifoldGrid> {
        &self.grid
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn density(&self) -> Vec<f64> {
        self.log_density.iter().map(|f| f.exp()).collect()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Cached `C²` norm of the log-density.
    pub fn c2_norm(&self) -> f64 {
        self.c2_norm
    }

    /// `C²` norm of `log(dμ/dVol_norm)` where `Vol_norm = Vol/|M|`, i.e. of
    /// `f + log|M|`. This is the quantity bounded by the admission budget.
    pub fn admission_norm(&self) -> f64 {
        let shift = self.grid.total_volume().ln();
        let shifted: Vec<f64> = self.log_density.iter().map(|f| f + shift).collect();
        c2_norm(&self.grid, &shifted)
    }

    /// Cell masses `e^f · vol`.
    pub fn masses(&self) -> Vec<f64> {
        self.log_density
            .iter()
            .enumerate()
            .map(|(i, f)| f.exp() * self.grid.cell_volume(i))
            .collect()
    }

    pub fn mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    /// `∫ v dμ` by the midpoint rule.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.masses().iter().zip(values).map(|(m, v)| m * v).sum()
    }

    pub fn min_density(&self) -> f64 {
        self.log_density.iter().copied().fold(f64::INFINITY, f64::min).exp()
    }

    pub fn max_density(&self) -> f64 {
        self.log_density.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp()
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized { mass: self.mass() })
        }
    }
}

/// Adds a constant to the log-density so that the total mass is 1.
pub fn normalize_density(field: &DensityField) -> DensityField {
    if field.normalized {
        return field.clone();
    }
    let shift = field.mass().ln();
    let log_density: Vec<f64> = field.log_density.iter().map(|f| f - shift).collect();
    let c2 = c2_norm(&field.grid, &log_density);
    DensityField { grid: field.grid.clone(), log_density, normalized: true, c2_norm: c2 }
}

fn same_grid(a: &Arc<ManifoldGrid>, b: &Arc<ManifoldGrid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// `ρ(t) = (1-t)μ + tν`, computed in log-sum-exp form and renormalized.
pub fn path_density(mu: &DensityField, nu: &DensityField, t: f64) -> Result<DensityField> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::ParameterOutOfRange(format!("path parameter t = {t}")));
    }
    if !same_grid(&mu.grid, &nu.grid) {
        return Err(Error::GridMismatch);
    }
    mu.require_normalized()?;
    nu.require_normalized()?;
    if t == 0.0 {
        return Ok(mu.clone());
    }
    if t == 1.0 {
        return Ok(nu.clone());
    }
    let (a, b) = ((1.0 - t).ln(), t.ln());
    let log_density: Vec<f64> = mu
        .log_density
        .iter()
        .zip(&nu.log_density)
        .map(|(f, g)| {
            let (x, y) = (a + f, b + g);
            let m = x.max(y);
            m + ((x - m).exp() + (y - m).exp()).ln()
        })
        .collect();
    let field = DensityField::new(mu.grid.clone(), log_density)?;
    Ok(normalize_density(&field))
}

/// A potential `u` with its recorded gauge `∫u dμ`.
#[derive(Clone, Debug)]
pub struct Potential {
    grid: Arc<ManifoldGrid>,
    values: Vec<f64>,
    gauge: f64,
}

impl Potential {
    pub fn new(grid: Arc<ManifoldGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, values, gauge: f64::NAN })
    }

    pub fn zeros(grid: Arc<ManifoldGrid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n], gauge: 0.0 }
    }

    pub fn grid(&self) -> &Arc<ManifoldGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `∫u dμ` after the last projection (NaN if never projected).
    pub fn gauge(&self) -> f64 {
        self.gauge
    }

    /// Minimum eigenvalue of the covariant Hessian over the grid.
    pub fn min_hessian_eigenvalue(&self) -> f64 {
        let n = self.grid.dim();
        let (_, hess) = frame_derivatives(&self.grid, &self.values);
        hess.iter().map(|h| crate::linalg::min_eigenvalue(n, h)).fold(f64::INFINITY, f64::min)
    }

    /// Semi-convexity witness `D²u ≥ -A`.
    pub fn check_semiconvex(&self, a: f64) -> Result<()> {
        let m = self.min_hessian_eigenvalue();
        if m < -a {
            Err(Error::NotSemiconvex { min_eig: m, bound: a })
        } else {
            Ok(())
        }
    }
}

/// `u - ∫u dμ`; idempotent up to rounding.
pub fn mean_zero_project(u: &Potential, mu: &DensityField) -> Result<Potential> {
    if !same_grid(&u.grid, &mu.grid) {
        return Err(Error::GridMismatch);
    }
    let masses = mu.masses();
    let total: f64 = masses.iter().sum();
    let mean = masses.iter().zip(&u.values).map(|(m, v)| m * v).sum::<f64>() / total;
    let values: Vec<f64> = u.values.iter().map(|v| v - mean).collect();
    let gauge = masses.iter().zip(&values).map(|(m, v)| m * v).sum::<f64>();
    Ok(Potential { grid: u.grid.clone(), values, gauge })
}
