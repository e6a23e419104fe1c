use crate::fields::{fd_gradient, fd_hessian, fd_partial, Potential};
use crate::geometry::ManifoldGrid;
use crate::transport::{assemble, Assembly, TransportProblem};
use crate::Result;

/// `dF(u, t)(z)` from precomputed pointwise coefficients.
pub fn apply_linearization(grid: &ManifoldGrid, asm: &Assembly, z: &[f64]) -> Vec<f64> {
    let n = grid.dim();
    let dz = fd_gradient(grid, z);
    let hz = fd_hessian(grid, z);
    asm.points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut v = 0.0;
            for a in 0..n {
                v += p.b[a] * dz[i][a];
                for b in 0..n {
                    v += p.a[a][b] * hz[i][a][b];
                }
            }
            v
        })
        .collect()
}

/// `dF(u, t)(z) = w^{ij} z_ij + (drift) · ∇z`, assembled pointwise.
pub fn linearized_apply(problem: &TransportProblem, u: &Potential, t: f64, z: &[f64]) -> Result<Vec<f64>> {
    let asm = assemble(problem, u, t)?;
    Ok(apply_linearization(problem.grid(), &asm, z))
}

/// `Lz = Δ_w z + ∇β · ∇z` with `β = f - ½ log det w`, written in divergence
/// form `e^{-f} ∂_i(e^f w^{ij} ∂_j z)` and discretized by central fluxes.
/// Agrees with `dF(z)` at solutions up to discretization error.
pub fn divergence_form_apply(problem: &TransportProblem, asm: &Assembly, z: &[f64]) -> Vec<f64> {
    let grid = problem.grid();
    let n = grid.dim();
    let f = problem.mu().log_density();
    let dz = fd_gradient(grid, z);
    let mut out = vec![0.0; grid.len()];
    for i in 0..n {
        let flux: Vec<f64> = (0..grid.len())
            .map(|k| {
                let a = &asm.points[k].a;
                f[k].exp() * (0..n).map(|j| a[i][j] * dz[k][j]).sum::<f64>()
            })
            .collect();
        let div = fd_partial(grid, &flux, i);
        out.iter_mut().zip(&div).for_each(|(o, d)| *o += d);
    }
    out.iter_mut().zip(f).for_each(|(o, f)| *o *= (-f).exp());
    out
}
