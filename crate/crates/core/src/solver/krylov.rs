//! Matrix-free Krylov solvers on plain `Vec<f64>` grids.

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOutcome {
    pub iterations: usize,
    /// `‖b - Ax‖ / ‖b‖` at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients for `A x = b` with `A` and `M⁻¹`
/// symmetric positive definite. Stops early (unconverged) on curvature
/// breakdown, which signals a nonsymmetric or indefinite operator.
pub fn pcg(
    op: impl Fn(&[f64]) -> Vec<f64>,
    prec: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> KrylovOutcome {
    let bn = norm(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return KrylovOutcome { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let ax = op(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z = prec(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = norm(&r) / bn;
    for it in 0..max_iter {
        if rel <= tol {
            return KrylovOutcome { iterations: it, relative_residual: rel, converged: true };
        }
        let ap = op(&p);
        let curv = dot(&p, &ap);
        if !(curv > 0.0) || !(rz > 0.0) {
            return KrylovOutcome { iterations: it, relative_residual: rel, converged: false };
        }
        let alpha = rz / curv;
        axpy(x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        rel = norm(&r) / bn;
        z = prec(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    KrylovOutcome { iterations: max_iter, relative_residual: rel, converged: rel <= tol }
}

/// Right-preconditioned restarted GMRES(m) with modified Gram-Schmidt.
pub fn gmres(
    op: impl Fn(&[f64]) -> Vec<f64>,
    prec: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> KrylovOutcome {
    let bn = norm(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return KrylovOutcome { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut total = 0;
    loop {
        let ax = op(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        let rel = beta / bn;
        if rel <= tol || total >= max_iter {
            return KrylovOutcome { iterations: total, relative_residual: rel, converged: rel <= tol };
        }
        let m = restart.min(max_iter - total);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let zk = prec(&basis[k]);
            let mut v = op(&zk);
            for (j, q) in basis.iter().enumerate() {
                h[j][k] = dot(&v, q);
                axpy(&mut v, -h[j][k], q);
            }
            h[k + 1][k] = norm(&v);
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (h[k][k] / d, h[k + 1][k] / d) };
            cs[k] = c;
            sn[k] = s;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            k_used = k + 1;
            total += 1;
            if g[k + 1].abs() / bn <= tol {
                break;
            }
            let hn = norm(&v);
            if hn == 0.0 {
                break;
            }
            basis.push(v.iter().map(|x| x / hn).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] == 0.0 { 0.0 } else { s / h[i][i] };
        }
        let mut update = vec![0.0; x.len()];
        for (yi, q) in y.iter().zip(&basis) {
            axpy(&mut update, *yi, q);
        }
        let dz = prec(&update);
        axpy(x, 1.0, &dz);
    }
}
