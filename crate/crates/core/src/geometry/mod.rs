//! Manifolds, grids, geodesics and the derivatives of the cost `c = d²/2`.
//!
//! Two manifolds are supported:
//!
//! - the flat torus `Tⁿ` (`n = 1, 2, 3`) with per-axis periods, where the cost
//!   derivatives are exact constants (`c_ij = δ_ij`, `c_{is̄} = -δ_is`, all
//!   higher derivatives and `ζ` vanish);
//! - an equatorial band chart of the round sphere `S²` of radius `R`, with
//!   chart coordinates `(R·lon, R·lat)` and `|lat| ≤ lat_max`.
//!
//! Points are stored in chart coordinates. Tangent vectors and all tensors are
//! expressed in the orthonormal frame of the chart (`∂_x` on the torus;
//! east/north on the sphere), which plays the role of normal coordinates
//! centred at the point.

mod cost;
mod sphere;

pub use cost::{CostTensors, Tensor3, Tensor4};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::linalg::{Mat3, Vec3, ZERO3, ZERO33};
use crate::{Error, Result};

/// Lower/upper constants of the chart-to-metric equivalence required of
/// normal charts of radius 2.
pub const CHART_LOWER: f64 = 0.9;
pub const CHART_UPPER: f64 = 1.1;

/// Minimum grid resolution per axis.
pub const MIN_RESOLUTION: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manifold {
    Torus { dim: usize, periods: Vec3 },
    SphereChart { radius: f64, lat_max: f64 },
}

impl Manifold {
    /// Flat torus with the given per-axis periods (1 to 3 axes).
    pub fn torus(periods: &[f64]) -> Self {
        assert!((1..=3).contains(&periods.len()), "torus dimension must be 1..=3");
        let mut p = ZERO3;
        p[..periods.len()].copy_from_slice(periods);
        Manifold::Torus { dim: periods.len(), periods: p }
    }

    /// Equatorial band of the sphere of the given radius; `margin` is the
    /// excluded polar cap size in radians.
    pub fn sphere_chart(radius: f64, margin: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::ParameterOutOfRange(format!("sphere radius {radius}")));
        }
        if !(margin > 0.0 && margin < PI / 2.0) {
            return Err(Error::ParameterOutOfRange(format!("chart margin {margin}")));
        }
        Ok(Manifold::SphereChart { radius, lat_max: PI / 2.0 - margin })
    }

    pub fn dim(&self) -> usize {
        match self {
            Manifold::Torus { dim, .. } => *dim,
            Manifold::SphereChart { .. } => 2,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Manifold::Torus { .. })
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self {
            Manifold::Torus { dim, periods } => {
                periods[..*dim].iter().copied().fold(f64::INFINITY, f64::min) / 2.0
            }
            Manifold::SphereChart { radius, .. } => PI * radius,
        }
    }

    /// Diameter of the manifold.
    pub fn diameter(&self) -> f64 {
        match self {
            Manifold::Torus { dim, periods } => {
                periods[..*dim].iter().map(|p| (p / 2.0).powi(2)).sum::<f64>().sqrt()
            }
            Manifold::SphereChart { radius, .. } => PI * radius,
        }
    }

    /// Diagonal of the chart metric `g₀` at `x` (the chart metric is diagonal
    /// for both supported manifolds).
    pub fn chart_metric(&self, x: &Vec3) -> Vec3 {
        match self {
            Manifold::Torus { dim, .. } => {
                let mut g = ZERO3;
                g[..*dim].fill(1.0);
                g
            }
            Manifold::SphereChart { radius, .. } => {
                let c = (x[1] / radius).cos();
                [c * c, 1.0, 0.0]
            }
        }
    }

    /// Range of `Σ(ξⁱ)² / ‖ξ‖²_{g₀}` over chart vectors at `x`.
    pub fn chart_equivalence_ratio(&self, x: &Vec3) -> (f64, f64) {
        let g = self.chart_metric(x);
        let n = self.dim();
        let inv: Vec<f64> = g[..n].iter().map(|v| 1.0 / v).collect();
        let lo = inv.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = inv.iter().copied().fold(0.0, f64::max);
        (lo, hi)
    }

    /// Canonical chart coordinates (periodic axes wrapped into `[0, P)`).
    pub fn wrap(&self, x: &Vec3) -> Vec3 {
        match self {
            Manifold::Torus { dim, periods } => {
                let mut y = *x;
                for a in 0..*dim {
                    y[a] = x[a].rem_euclid(periods[a]);
                }
                y
            }
            Manifold::SphereChart { radius, .. } => {
                [x[0].rem_euclid(2.0 * PI * radius), x[1], 0.0]
            }
        }
    }

    pub fn distance(&self, x: &Vec3, y: &Vec3) -> f64 {
        match self {
            Manifold::Torus { dim, periods } => {
                let mut s = 0.0;
                for a in 0..*dim {
                    let d = min_image(y[a] - x[a], periods[a]);
                    s += d * d;
                }
                s.sqrt()
            }
            Manifold::SphereChart { radius, .. } => sphere::distance(*radius, x, y),
        }
    }

    /// Exponential map; `v` is given in the orthonormal frame at `x`.
    pub fn exp(&self, x: &Vec3, v: &Vec3) -> Result<Vec3> {
        let n = self.dim();
        let norm = crate::linalg::norm(n, v);
        let limit = self.injectivity_radius();
        if norm >= limit {
            return Err(Error::VectorTooLong { norm, limit });
        }
        Ok(match self {
            Manifold::Torus { dim, .. } => {
                let mut y = *x;
                for a in 0..*dim {
                    y[a] += v[a];
                }
                self.wrap(&y)
            }
            Manifold::SphereChart { radius, .. } => sphere::exp(*radius, x, v),
        })
    }

    /// Inverse exponential map in the orthonormal frame at `x`.
    pub fn log(&self, x: &Vec3, y: &Vec3) -> Vec3 {
        match self {
            Manifold::Torus { dim, periods } => {
                let mut v = ZERO3;
                for a in 0..*dim {
                    v[a] = min_image(y[a] - x[a], periods[a]);
                }
                v
            }
            Manifold::SphereChart { radius, .. } => sphere::log(*radius, x, y),
        }
    }

    /// Frame components of a chart gradient `∂_a u`: `∇u = Σ (∂_a u / s_a) e_a`
    /// with `s_a = |∂_a|_{g₀}`.
    pub fn frame_gradient(&self, x: &Vec3, coord_grad: &Vec3) -> Vec3 {
        let g = self.chart_metric(x);
        let mut out = ZERO3;
        for a in 0..self.dim() {
            out[a] = coord_grad[a] / g[a].sqrt();
        }
        out
    }

    /// Covariant Hessian in the orthonormal frame from chart first and second
    /// partials.
    pub fn frame_hessian(&self, x: &Vec3, coord_grad: &Vec3, coord_hess: &Mat3) -> Mat3 {
        match self {
            Manifold::Torus { .. } => *coord_hess,
            Manifold::SphereChart { radius, .. } => {
                let phi = x[1] / radius;
                let (s, c) = phi.sin_cos();
                // Christoffel symbols of diag(cos²φ, 1) in (R·lon, R·lat).
                let h_xx = coord_hess[0][0] - (s * c / radius) * coord_grad[1];
                let h_xy = coord_hess[0][1] + (s / c / radius) * coord_grad[0];
                let h_yy = coord_hess[1][1];
                let mut out = ZERO33;
                out[0][0] = h_xx / (c * c);
                out[0][1] = h_xy / c;
                out[1][0] = h_xy / c;
                out[1][1] = h_yy;
                out
            }
        }
    }

    /// Converts a frame tensor `w_ab` to chart components `w(∂_a, ∂_b)`.
    pub fn frame_to_chart(&self, x: &Vec3, m: &Mat3) -> Mat3 {
        let g = self.chart_metric(x);
        let n = self.dim();
        let mut out = ZERO33;
        for a in 0..n {
            for b in 0..n {
                out[a][b] = m[a][b] * g[a].sqrt() * g[b].sqrt();
            }
        }
        out
    }

    /// Converts a chart direction to frame components.
    pub fn chart_vector_to_frame(&self, x: &Vec3, v: &Vec3) -> Vec3 {
        let g = self.chart_metric(x);
        let mut out = ZERO3;
        for a in 0..self.dim() {
            out[a] = v[a] * g[a].sqrt();
        }
        out
    }

    /// Derivatives of `c(x, y) = d²(x, y)/2` up to fourth order.
    ///
    /// Fails with [`Error::CutLocusProximity`] unless `d(x, y) < ι/2`.
    pub fn cost_tensors(&self, x: &Vec3, y: &Vec3) -> Result<CostTensors> {
        let d = self.distance(x, y);
        let limit = self.injectivity_radius() / 2.0;
        if d >= limit {
            return Err(Error::CutLocusProximity { distance: d, limit });
        }
        Ok(match self {
            Manifold::Torus { dim, .. } => CostTensors::flat(*dim, &self.log(x, y)),
            Manifold::SphereChart { radius, .. } => sphere::cost_tensors(*radius, x, y),
        })
    }

    /// `max_K |D²c|` over the working neighbourhood `d(x, y) ≤ radius`, where
    /// `|D²c|` is the operator norm of the `c_ij` and `c_{is̄}` blocks.
    pub fn max_d2c(&self, radius: f64) -> f64 {
        match self {
            Manifold::Torus { .. } => 1.0,
            Manifold::SphereChart { radius: r, .. } => {
                let theta = (radius / r).min(PI / 2.0);
                if theta < 1e-12 {
                    1.0
                } else {
                    (theta / theta.sin()).max(1.0)
                }
            }
        }
    }

    /// `sup_K |(D D̄ c)⁻¹|` over the same neighbourhood.
    pub fn inverse_mixed_bound(&self, _radius: f64) -> f64 {
        // Eigenvalues of -c_{is̄} are 1 and θ/sin θ ≥ 1 on both manifolds.
        1.0
    }
}

/// Signed minimal-image difference on a circle of the given period.
pub fn min_image(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}

/// A manifold together with its discretization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldGrid {
    manifold: Manifold,
    resolution: [usize; 3],
    scale: f64,
}

impl ManifoldGrid {
    pub fn new(manifold: Manifold, resolution: &[usize]) -> Result<Self> {
        let n = manifold.dim();
        if resolution.len() != n {
            return Err(Error::InvalidGrid(format!(
                "resolution has {} axes, manifold has dimension {n}",
                resolution.len()
            )));
        }
        if let Some(r) = resolution.iter().find(|&&r| r < MIN_RESOLUTION) {
            return Err(Error::InvalidGrid(format!("resolution {r} below minimum {MIN_RESOLUTION}")));
        }
        match &manifold {
            Manifold::Torus { dim, periods } => {
                if periods[..*dim].iter().any(|p| !(*p > 0.0)) {
                    return Err(Error::InvalidGrid("torus periods must be positive".into()));
                }
            }
            Manifold::SphereChart { radius, lat_max } => {
                if !(*radius > 0.0 && *lat_max > 0.0 && *lat_max < PI / 2.0) {
                    return Err(Error::InvalidGrid("sphere chart bounds out of range".into()));
                }
            }
        }
        let mut res = [1usize; 3];
        res[..n].copy_from_slice(resolution);
        Ok(Self { manifold, resolution: res, scale: 1.0 })
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution[..self.dim()]
    }

    /// Accumulated metric scale factor applied by [`normalize_manifold`].
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.resolution().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        match self.manifold {
            Manifold::Torus { .. } => true,
            Manifold::SphereChart { .. } => axis == 0,
        }
    }

    /// Extent of the chart along an axis.
    pub fn extent(&self, axis: usize) -> f64 {
        match &self.manifold {
            Manifold::Torus { periods, .. } => periods[axis],
            Manifold::SphereChart { radius, lat_max } => {
                if axis == 0 {
                    2.0 * PI * radius
                } else {
                    2.0 * radius * lat_max
                }
            }
        }
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent(axis) / self.resolution[axis] as f64
    }

    /// Largest grid spacing.
    pub fn h_max(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    fn stride(&self, axis: usize) -> usize {
        self.resolution[axis + 1..self.dim()].iter().product()
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        let mut rem = idx;
        for a in (0..self.dim()).rev() {
            out[a] = rem % self.resolution[a];
            rem /= self.resolution[a];
        }
        out
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for a in 0..self.dim() {
            idx = idx * self.resolution[a] + multi[a];
        }
        idx
    }

    /// Neighbour `offset` steps along `axis`, wrapping periodic axes; `None`
    /// past the edge of a non-periodic axis.
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> Option<usize> {
        let m = self.multi_index(idx);
        let r = self.resolution[axis] as isize;
        let mut j = m[axis] as isize + offset;
        if self.is_periodic(axis) {
            j = j.rem_euclid(r);
        } else if j < 0 || j >= r {
            return None;
        }
        let stride = self.stride(axis);
        Some((idx as isize + (j - m[axis] as isize) * stride as isize) as usize)
    }

    /// Chart coordinates of a grid point (cell centre).
    pub fn point(&self, idx: usize) -> Vec3 {
        let m = self.multi_index(idx);
        let mut x = ZERO3;
        match &self.manifold {
            Manifold::Torus { dim, .. } => {
                for a in 0..*dim {
                    x[a] = m[a] as f64 * self.spacing(a);
                }
            }
            Manifold::SphereChart { radius, lat_max } => {
                x[0] = m[0] as f64 * self.spacing(0);
                x[1] = -radius * lat_max + (m[1] as f64 + 0.5) * self.spacing(1);
            }
        }
        x
    }

    pub fn points(&self) -> Vec<Vec3> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Riemannian volume of the cell around a grid point (midpoint rule).
    pub fn cell_volume(&self, idx: usize) -> f64 {
        let base: f64 = (0..self.dim()).map(|a| self.spacing(a)).product();
        match &self.manifold {
            Manifold::Torus { .. } => base,
            Manifold::SphereChart { radius, .. } => base * (self.point(idx)[1] / radius).cos(),
        }
    }

    pub fn cell_volumes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.cell_volume(i)).collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volumes().iter().sum()
    }

    /// Continuous grid coordinate of a chart point along an axis (cell-centre
    /// index units).
    pub fn grid_coordinate(&self, x: &Vec3, axis: usize) -> f64 {
        match &self.manifold {
            Manifold::Torus { .. } => x[axis] / self.spacing(axis),
            Manifold::SphereChart { radius, lat_max } => {
                if axis == 0 {
                    x[0] / self.spacing(0)
                } else {
                    (x[1] + radius * lat_max) / self.spacing(1) - 0.5
                }
            }
        }
    }

    /// Nearest grid point to a chart point.
    pub fn nearest(&self, x: &Vec3) -> usize {
        let y = self.manifold.wrap(x);
        let mut m = [0usize; 3];
        for a in 0..self.dim() {
            let r = self.resolution[a] as isize;
            let s = self.grid_coordinate(&y, a).round() as isize;
            m[a] = if self.is_periodic(a) { s.rem_euclid(r) } else { s.clamp(0, r - 1) } as usize;
        }
        self.linear_index(&m)
    }

    /// Rescales the metric so that the injectivity radius exceeds 2; see
    /// [`normalize_manifold`].
    pub fn normalized(&self) -> Result<Self> {
        normalize_manifold(self)
    }
}

/// One-time metric scaling: when `ι ≤ 2` the metric is scaled by `s = 4/ι`
/// (so the new injectivity radius is 4); otherwise the grid is returned
/// unchanged. Sphere charts must also satisfy the 0.9/1.1 chart equivalence
/// on the whole band.
pub fn normalize_manifold(grid: &ManifoldGrid) -> Result<ManifoldGrid> {
    let iota = grid.manifold.injectivity_radius();
    let s = if iota > 2.0 { 1.0 } else { 4.0 / iota };
    let manifold = match &grid.manifold {
        Manifold::Torus { dim, periods } => {
            let mut p = *periods;
            for v in p.iter_mut().take(*dim) {
                *v *= s;
            }
            Manifold::Torus { dim: *dim, periods: p }
        }
        Manifold::SphereChart { radius, lat_max } => {
            let c = lat_max.cos();
            if 1.0 / (c * c) > CHART_UPPER {
                return Err(Error::ChartEquivalence { lat_max: *lat_max });
            }
            Manifold::SphereChart { radius: radius * s, lat_max: *lat_max }
        }
    };
    Ok(ManifoldGrid { manifold, resolution: grid.resolution, scale: grid.scale * s })
}
