//! Small dense linear algebra on padded 3x3 storage.
//!
//! Every routine takes the active dimension `n ∈ {1, 2, 3}`; entries outside
//! the leading `n×n` block are ignored on input and zeroed on output.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO3: Vec3 = [0.0; 3];
pub const ZERO33: Mat3 = [[0.0; 3]; 3];

pub fn identity(n: usize) -> Mat3 {
    let mut m = ZERO33;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

pub fn dot(n: usize, a: &Vec3, b: &Vec3) -> f64 {
    (0..n).map(|i| a[i] * b[i]).sum()
}

pub fn norm(n: usize, a: &Vec3) -> f64 {
    dot(n, a, a).sqrt()
}

pub fn mat_vec(n: usize, m: &Mat3, v: &Vec3) -> Vec3 {
    let mut out = ZERO3;
    for i in 0..n {
        out[i] = (0..n).map(|j| m[i][j] * v[j]).sum();
    }
    out
}

pub fn mat_mul(n: usize, a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = ZERO33;
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(n: usize, a: &Mat3) -> Mat3 {
    let mut out = ZERO33;
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn add(n: usize, a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = ZERO33;
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[i][j] + b[i][j];
        }
    }
    out
}

pub fn scale(n: usize, a: &Mat3, s: f64) -> Mat3 {
    let mut out = ZERO33;
    for i in 0..n {
        for j in 0..n {
            out[i][j] = s * a[i][j];
        }
    }
    out
}

pub fn trace(n: usize, a: &Mat3) -> f64 {
    (0..n).map(|i| a[i][i]).sum()
}

pub fn max_abs_diff(n: usize, a: &Mat3, b: &Mat3) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

pub fn det(n: usize, m: &Mat3) -> f64 {
    match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => panic!("unsupported dimension {n}"),
    }
}

/// Inverse by cofactors; `None` when the determinant vanishes.
pub fn inverse(n: usize, m: &Mat3) -> Option<Mat3> {
    let d = det(n, m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut out = ZERO33;
    match n {
        1 => out[0][0] = 1.0 / d,
        2 => {
            out[0][0] = m[1][1] / d;
            out[0][1] = -m[0][1] / d;
            out[1][0] = -m[1][0] / d;
            out[1][1] = m[0][0] / d;
        }
        3 => {
            for i in 0..3 {
                for j in 0..3 {
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    out[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / d;
                }
            }
        }
        _ => panic!("unsupported dimension {n}"),
    }
    Some(out)
}

/// Eigen-decomposition of a symmetric matrix. Eigenvalues ascend; column `k`
/// of the returned matrix is the unit eigenvector for eigenvalue `k`.
pub fn sym_eigen(n: usize, m: &Mat3) -> (Vec3, Mat3) {
    let mut vals = ZERO3;
    let mut vecs = ZERO33;
    match n {
        1 => {
            vals[0] = m[0][0];
            vecs[0][0] = 1.0;
        }
        2 => {
            let a = Matrix2::new(m[0][0], 0.5 * (m[0][1] + m[1][0]), 0.5 * (m[0][1] + m[1][0]), m[1][1]);
            let eig = SymmetricEigen::new(a);
            let mut order = [0usize, 1];
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            for (k, &src) in order.iter().enumerate() {
                vals[k] = eig.eigenvalues[src];
                for r in 0..2 {
                    vecs[r][k] = eig.eigenvectors[(r, src)];
                }
            }
        }
        3 => {
            let a = Matrix3::from_fn(|i, j| 0.5 * (m[i][j] + m[j][i]));
            let eig = SymmetricEigen::new(a);
            let mut order = [0usize, 1, 2];
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            for (k, &src) in order.iter().enumerate() {
                vals[k] = eig.eigenvalues[src];
                for r in 0..3 {
                    vecs[r][k] = eig.eigenvectors[(r, src)];
                }
            }
        }
        _ => panic!("unsupported dimension {n}"),
    }
    (vals, vecs)
}

pub fn min_eigenvalue(n: usize, m: &Mat3) -> f64 {
    sym_eigen(n, m).0[0]
}

pub fn max_eigenvalue(n: usize, m: &Mat3) -> f64 {
    sym_eigen(n, m).0[n - 1]
}

/// Largest eigenvalue with its unit eigenvector, sign fixed so that the first
/// non-negligible component is positive.
pub fn top_eigenpair(n: usize, m: &Mat3) -> (f64, Vec3) {
    let (vals, vecs) = sym_eigen(n, m);
    let mut e = ZERO3;
    for (r, slot) in e.iter_mut().enumerate().take(n) {
        *slot = vecs[r][n - 1];
    }
    if let Some(first) = e[..n].iter().find(|c| c.abs() > 1e-12) {
        if *first < 0.0 {
            for c in e.iter_mut().take(n) {
                *c = -*c;
            }
        }
    }
    (vals[n - 1], e)
}

/// Operator 2-norm of a symmetric matrix.
pub fn sym_operator_norm(n: usize, m: &Mat3) -> f64 {
    let (vals, _) = sym_eigen(n, m);
    vals[..n].iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Operator 2-norm of a general matrix, via the largest eigenvalue of `AᵀA`.
pub fn operator_norm(n: usize, m: &Mat3) -> f64 {
    let ata = mat_mul(n, &transpose(n, m), m);
    max_eigenvalue(n, &ata).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trips() {
        let m = [[2.0, 0.3, -0.1], [0.1, 1.5, 0.2], [0.4, -0.2, 3.0]];
        for n in 1..=3 {
            let inv = inverse(n, &m).unwrap();
            let prod = mat_mul(n, &m, &inv);
            assert!(max_abs_diff(n, &prod, &identity(n)) < 1e-14);
        }
    }

    #[test]
    fn eigenpairs_are_sorted_and_orthonormal() {
        let m = [[3.0, 1.0, 0.0], [1.0, 2.0, 0.5], [0.0, 0.5, 1.0]];
        let (vals, vecs) = sym_eigen(3, &m);
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        for k in 0..3 {
            let v = [vecs[0][k], vecs[1][k], vecs[2][k]];
            let mv = mat_vec(3, &m, &v);
            for r in 0..3 {
                assert!((mv[r] - vals[k] * v[r]).abs() < 1e-12);
            }
        }
        let (top, e) = top_eigenpair(2, &[[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]]);
        assert_eq!(top, 3.0);
        assert!((e[0] - 1.0).abs() < 1e-15 && e[1].abs() < 1e-15);
    }
}
