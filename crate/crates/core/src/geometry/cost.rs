use std::ops::{Index, IndexMut};

use crate::linalg::{identity, scale, Mat3, Vec3, ZERO3};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tensor3(pub [[[f64; 3]; 3]; 3]);

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tensor4(pub [[[[f64; 3]; 3]; 3]; 3]);

impl Tensor3 {
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Tensor4 {
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.0[i][j][k]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        &mut self.0[i][j][k]
    }
}

impl Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (i, j, k, l): (usize, usize, usize, usize)) -> &f64 {
        &self.0[i][j][k][l]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (i, j, k, l): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.0[i][j][k][l]
    }
}

/// Derivatives of `c(x, y) = d²(x, y)/2`.
///
/// Unbarred indices are derivatives in `x` (orthonormal frame at `x`), barred
/// ones in `y` (orthonormal frame at `y`). Higher derivatives are covariant.
#[derive(Clone, Debug, PartialEq)]
pub struct CostTensors {
    pub dim: usize,
    /// `c_i`, equal to `-log_x(y)`.
    pub c_x: Vec3,
    /// `c_ij`.
    pub c_xx: Mat3,
    /// `c_{is̄}`; row index in `x`, column index in `y`.
    pub c_xy: Mat3,
    /// `c_{ijk}`.
    pub c_xxx: Tensor3,
    /// `c_{ijs̄}`.
    pub c_xxy: Tensor3,
    /// `c_{is̄t̄}`.
    pub c_xyy: Tensor3,
    /// `c_{ijs̄t̄}`.
    pub c_xxyy: Tensor4,
    /// `ζ = log det(-c_{is̄})`.
    pub zeta: f64,
    /// `ζ_i`.
    pub zeta_x: Vec3,
    /// `ζ_s̄`.
    pub zeta_y: Vec3,
}

impl CostTensors {
    /// Tensors of the flat cost `|x - y|²/2` for the displacement `y - x`.
    pub fn flat(dim: usize, displacement: &Vec3) -> Self {
        let mut c_x = ZERO3;
        for a in 0..dim {
            c_x[a] = -displacement[a];
        }
        Self {
            dim,
            c_x,
            c_xx: identity(dim),
            c_xy: scale(dim, &identity(dim), -1.0),
            c_xxx: Tensor3::default(),
            c_xxy: Tensor3::default(),
            c_xyy: Tensor3::default(),
            c_xxyy: Tensor4::default(),
            zeta: 0.0,
            zeta_x: ZERO3,
            zeta_y: ZERO3,
        }
    }

    /// Largest absolute third-order entry.
    pub fn max_d3(&self) -> f64 {
        self.c_xxx.max_abs().max(self.c_xxy.max_abs()).max(self.c_xyy.max_abs())
    }
}
