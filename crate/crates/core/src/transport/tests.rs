use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use super::*;
use crate::fields::{density_from_spec, DensitySpec};
use crate::geometry::Manifold;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn torus(n: &[usize], p: f64) -> Arc<ManifoldGrid> {
    Arc::new(ManifoldGrid::new(Manifold::torus(&vec![p; n.len()]), n).unwrap())
}

fn sphere(n: &[usize]) -> Arc<ManifoldGrid> {
    Arc::new(ManifoldGrid::new(Manifold::sphere_chart(1.0, 1.3).unwrap(), n).unwrap())
}

fn potential(grid: &Arc<ManifoldGrid>, f: impl Fn(&Vec3) -> f64) -> Potential {
    Potential::new(grid.clone(), grid.points().iter().map(f).collect()).unwrap()
}

fn bump(grid: &Arc<ManifoldGrid>, center: f64, amplitude: f64) -> crate::fields::DensityField {
    let n = grid.dim();
    let spec = DensitySpec::GaussianBump { center: vec![center; n], width: 0.8, amplitude };
    density_from_spec(grid, &spec).unwrap()
}

/// A smooth potential on the sphere chart band.
fn sphere_u(x: &Vec3, a: f64) -> f64 {
    a * (x[0].sin() * (3.0 * x[1]).cos() + 0.5 * (2.0 * x[0]).cos() * x[1])
}

#[test]
fn zero_potential_is_identity_on_torus() {
    let g = torus(&[16, 16], TAU);
    let map = transport_map(&Potential::zeros(g.clone())).unwrap();
    let wf = hessian_metric(&g, &map).unwrap();
    for i in 0..g.len() {
        assert_eq!(map.target[i], g.point(i));
        assert!(linalg::max_abs_diff(2, &wf.w[i], &linalg::identity(2)) < 1e-14);
    }
    assert!(wf.all_positive());
    assert!(map.first_order_residual(&g).unwrap() <= 1e-8);
}

#[test]
fn zero_potential_is_identity_on_sphere() {
    let g = sphere(&[32, 16]);
    let map = transport_map(&Potential::zeros(g.clone())).unwrap();
    let wf = hessian_metric(&g, &map).unwrap();
    for i in 0..g.len() {
        assert!(g.manifold().distance(&map.target[i], &g.point(i)) < 1e-14);
        assert!(linalg::max_abs_diff(2, &wf.w[i], &linalg::identity(2)) < 1e-10);
    }
}

fn sine_errors(n: usize) -> (f64, f64, f64) {
    let p = 4.0;
    let a = 0.05;
    let k = TAU / p;
    let g = torus(&[n], p);
    let u = potential(&g, |x| a * (k * x[0]).sin());
    let map = transport_map(&u).unwrap();
    assert!(map.first_order_residual(&g).unwrap() <= 1e-8);
    let wf = hessian_metric(&g, &map).unwrap();
    let dual = dual_form_metric(&g, &map, &wf);
    let (mut et, mut ew, mut ed) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..g.len() {
        let x = g.point(i)[0];
        let t = x + a * k * (k * x).cos();
        et = et.max(min_image(map.target[i][0] - t, p).abs());
        let w = 1.0 - a * k * k * (k * x).sin();
        ew = ew.max((wf.w[i][0][0] - w).abs());
        ed = ed.max((dual[i][0][0] - wf.w[i][0][0]).abs());
    }
    (et, ew, ed)
}

use crate::geometry::min_image;

#[test]
fn sine_potential_map_and_metric() {
    let (t1, w1, d1) = sine_errors(64);
    let (t2, w2, d2) = sine_errors(128);
    assert!(t1 < 1e-3 && w1 < 1e-3 && d1 < 1e-3, "{t1} {w1} {d1}");
    for (e1, e2) in [(t1, t2), (w1, w2), (d1, d2)] {
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }
}

#[test]
fn sphere_displacement_equals_gradient_norm() {
    let g = sphere(&[32, 16]);
    let u = potential(&g, |x| 0.1 * (-(x[0] - PI).powi(2) - 4.0 * x[1].powi(2)).exp());
    let map = transport_map(&u).unwrap();
    for i in 0..g.len() {
        let d = g.manifold().distance(&g.point(i), &map.target[i]);
        assert!((d - linalg::norm(2, &map.gradient[i])).abs() < 1e-8);
    }
    assert!(map.first_order_residual(&g).unwrap() < 1e-8);
}

#[test]
fn displacement_guard() {
    let g = torus(&[16], 1.0);
    let u = potential(&g, |x| 0.2 * (TAU * x[0]).sin());
    assert!(matches!(transport_map(&u), Err(Error::DisplacementTooLarge { .. })));
}

fn sphere_consistency(n: usize) -> (f64, f64, f64, f64) {
    let g = sphere(&[2 * n, n]);
    let u = potential(&g, |x| sphere_u(x, 0.05));
    let map = transport_map(&u).unwrap();
    let wf = hessian_metric(&g, &map).unwrap();
    assert!(wf.all_positive());
    let dual = dual_form_metric(&g, &map, &wf);
    let det = det_identity_residual(&g, &map, &wf);
    let (mut ed, mut edet, mut eg, mut eh) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    // Interior points away from the one-sided boundary rows.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let probes: Vec<usize> = (0..10)
        .map(|_| {
            let i0 = rng.gen_range(0..2 * n);
            let frac: f64 = rng.gen_range(0.3..0.7);
            g.linear_index(&[i0, (frac * n as f64) as usize])
        })
        .map(|i| {
            // Same physical point at every resolution: snap to a coarse lattice.
            let x = g.point(i);
            g.nearest(&[(x[0] / 0.5).round() * 0.5, 0.0, 0.0])
        })
        .collect();
    for i in 0..g.len() {
        let row = g.multi_index(i)[1];
        if row < 2 || row + 2 >= n {
            continue;
        }
        ed = ed.max(linalg::max_abs_diff(2, &dual[i], &wf.w[i]));
        edet = edet.max(det[i].abs());
    }
    for &i in &probes {
        let (grad, hess) = metric_interpretation(&u, &map, i);
        eg = eg.max(linalg::norm(2, &grad));
        eh = eh.max(linalg::max_abs_diff(2, &hess, &wf.w[i]));
    }
    (ed, edet, eg, eh)
}

#[test]
fn sphere_dual_form_det_identity_and_metric_interpretation() {
    let c = sphere_consistency(16);
    let f = sphere_consistency(32);
    for (e1, e2, what) in [(c.0, f.0, "dual"), (c.1, f.1, "det"), (c.2, f.2, "grad"), (c.3, f.3, "hess")] {
        assert!(e1 < 2e-2, "{what} {e1}");
        let order = (e1 / e2).log2();
        assert!(order > 1.7, "{what} order {order} ({e1} -> {e2})");
    }
}

#[test]
fn residual_at_origin_and_along_path() {
    let g = torus(&[16, 16], TAU);
    let mu = bump(&g, 2.0, 1.0);
    let nu = bump(&g, 4.0, 1.0);
    let pb = TransportProblem::new(mu.clone(), nu.clone()).unwrap();
    let u = Potential::zeros(g.clone());
    let r0 = mae_residual(&pb, &u, 0.0).unwrap();
    assert!(r0.iter().all(|r| r.abs() < 1e-12));
    let t = 0.4;
    let rho = pb.rho(t).unwrap();
    let r = mae_residual(&pb, &u, t).unwrap();
    for i in 0..g.len() {
        let expect = rho.log_density()[i] - mu.log_density()[i];
        assert!((r[i] - expect).abs() < 1e-10);
    }
    assert!(r.iter().any(|v| v.abs() > 1e-2));
}

#[test]
fn sphere_problem_rejected() {
    let g = sphere(&[16, 8]);
    let mu = density_from_spec(&g, &DensitySpec::Uniform).unwrap();
    assert!(matches!(TransportProblem::new(mu.clone(), mu), Err(Error::UnsupportedManifold(_))));
}

#[test]
fn non_convex_potential_flagged() {
    let g = torus(&[32], TAU);
    let mu = density_from_spec(&g, &DensitySpec::Uniform).unwrap();
    let pb = TransportProblem::new(mu.clone(), mu).unwrap();
    let u = potential(&g, |x| 1.2 * x[0].cos());
    assert!(matches!(mae_residual(&pb, &u, 0.5), Err(Error::NotCConvex { .. })));
    let u = potential(&g, |x| 1.2 * x[0].cos());
    assert!(matches!(pushforward_error(&pb, &u, 0.5), Err(Error::JacobianSignFlip { .. })));
}

#[test]
fn pushforward_of_identity_is_zero() {
    let g = torus(&[16, 16], TAU);
    let mu = bump(&g, 2.0, 1.0);
    let nu = bump(&g, 4.0, 1.0);
    let pb = TransportProblem::new(mu, nu).unwrap();
    let rep = pushforward_error(&pb, &Potential::zeros(g.clone()), 0.0).unwrap();
    assert!(rep.tv < 1e-14, "{rep:?}");
    assert!(rep.jacobian_sup < 1e-12);
    assert!(rep.injective_on_grid);
    let rep = pushforward_error(&pb, &Potential::zeros(g), 1.0).unwrap();
    assert!(rep.tv > 1e-2);
}

/// `F(u + εz) - F(u) - ε dF(z)` on the grid, using the assembled coefficients.
fn taylor_defect(pb: &TransportProblem, u: &Potential, z: &[f64], t: f64, eps: f64) -> f64 {
    let g = pb.grid();
    let base = assemble(pb, u, t).unwrap();
    let moved: Vec<f64> = u.values().iter().zip(z).map(|(a, b)| a + eps * b).collect();
    let pert = assemble(pb, &Potential::new(g.clone(), moved).unwrap(), t).unwrap();
    let (dz, hz) = frame_derivatives(g, z);
    let n = g.dim();
    (0..g.len())
        .map(|i| {
            let p = &base.points[i];
            let mut lin = 0.0;
            for a in 0..n {
                lin += p.b[a] * dz[i][a];
                for b in 0..n {
                    lin += p.a[a][b] * hz[i][a][b];
                }
            }
            (pert.points[i].residual - p.residual - eps * lin).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn torus_linearization_is_second_order() {
    let g = torus(&[24, 24], TAU);
    let pb = TransportProblem::new(bump(&g, 2.0, 1.0), bump(&g, 4.0, 0.7)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let t: f64 = rng.gen_range(0.0..1.0);
        let (c1, c2, c3): (f64, f64, f64) = (rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(0.0..TAU));
        let u = potential(&g, |x| c1 * (x[0] + c3).sin() + c2 * (x[1] - x[0]).cos());
        let z: Vec<f64> = g.points().iter().map(|x| (2.0 * x[0]).cos() * x[1].sin() + 0.3 * (x[1] + c3).cos()).collect();
        let e1 = taylor_defect(&pb, &u, &z, t, 1e-3);
        let e2 = taylor_defect(&pb, &u, &z, t, 5e-4);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order} ({e1} {e2})");
    }
}

#[test]
fn flat_drift_matches_target_gradient() {
    // At u = 0 on the torus the drift is +∇g.
    let g = torus(&[16, 16], TAU);
    let pb = TransportProblem::new(bump(&g, 2.0, 1.0), bump(&g, 4.0, 1.0)).unwrap();
    let asm = assemble(&pb, &Potential::zeros(g.clone()), 0.5).unwrap();
    for i in 0..g.len() {
        let (_, dg, _) = pb.target_log_density(0.5, &g.point(i));
        for a in 0..2 {
            assert!((asm.points[i].b[a] - dg[a]).abs() < 1e-12);
        }
    }
}

/// Frame gradient of a chart function on the sphere.
fn sphere_g(m: &Manifold, y: &Vec3) -> (f64, Vec3) {
    let v = 0.3 * y[0].cos() + 0.7 * y[1] * y[1] + 0.2 * (y[0] + 2.0 * y[1]).sin();
    let d = [-0.3 * y[0].sin() + 0.2 * (y[0] + 2.0 * y[1]).cos(), 1.4 * y[1] + 0.4 * (y[0] + 2.0 * y[1]).cos(), 0.0];
    (v, m.frame_gradient(y, &d))
}

#[test]
fn sphere_pointwise_linearization_is_second_order() {
    let m = Manifold::sphere_chart(1.0, 1.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let x = [rng.gen_range(0.0..TAU), rng.gen_range(-0.2..0.2), 0.0];
        let grad = [rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), 0.0];
        let h01 = rng.gen_range(-0.2..0.2);
        let hess = [[rng.gen_range(-0.3..0.3), h01, 0.0], [h01, rng.gen_range(-0.3..0.3), 0.0], ZERO3];
        let zg = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0];
        let z01 = rng.gen_range(-1.0..1.0);
        let zh = [[rng.gen_range(-1.0..1.0), z01, 0.0], [z01, rng.gen_range(-1.0..1.0), 0.0], ZERO3];
        let g = |y: &Vec3| sphere_g(&m, y);
        let lin = pointwise_linearization(&m, &x, 0.1, &grad, &hess, g).unwrap();
        let dz = (0..2).map(|a| lin.b[a] * zg[a]).sum::<f64>()
            + (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| lin.a[a][b] * zh[a][b]).sum::<f64>();
        let defect = |eps: f64| {
            let g2: Vec3 = [grad[0] + eps * zg[0], grad[1] + eps * zg[1], 0.0];
            let h2 = linalg::add(2, &hess, &linalg::scale(2, &zh, eps));
            let f = pointwise_residual(&m, &x, 0.1, &g2, &h2, g).unwrap();
            (f - lin.residual - eps * dz).abs()
        };
        let order = (defect(1e-3) / defect(5e-4)).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }
}

fn gradient_of(grid: &Arc<ManifoldGrid>, f: impl Fn(&Vec3) -> Vec3) -> Vec<Vec3> {
    grid.points().iter().map(f).collect()
}

#[test]
fn injectivity_of_smooth_and_folded_maps() {
    let g1 = torus(&[64], TAU);
    assert!(injective_on_grid(&g1, &gradient_of(&g1, |_| ZERO3)).unwrap());
    // x - a sin x folds once a > 1.
    assert!(injective_on_grid(&g1, &gradient_of(&g1, |x| [-0.9 * x[0].sin(), 0.0, 0.0])).unwrap());
    assert!(!injective_on_grid(&g1, &gradient_of(&g1, |x| [-1.5 * x[0].sin(), 0.0, 0.0])).unwrap());

    let g2 = torus(&[32, 32], TAU);
    let smooth = |a: f64| move |x: &Vec3| [-a * x[0].sin(), -a * x[1].sin(), 0.0];
    assert!(injective_on_grid(&g2, &gradient_of(&g2, smooth(0.5))).unwrap());
    assert!(!injective_on_grid(&g2, &gradient_of(&g2, smooth(1.5))).unwrap());
    // A shear x ↦ (x + 0.8 sin y, y) has DT = [[1, 0.8 cos y], [0, 1]] and
    // stays a diffeomorphism although it is no gradient of a c-convex u.
    let shear = gradient_of(&g2, |x| [0.8 * x[1].sin(), 0.0, 0.0]);
    assert!(injective_on_grid(&g2, &shear).unwrap());

    let g3 = torus(&[8, 8, 8], TAU);
    assert!(injective_on_grid(&g3, &gradient_of(&g3, |x| [-0.3 * x[0].sin(), -0.3 * x[1].sin(), -0.3 * x[2].sin()])).unwrap());
    assert!(!injective_on_grid(&g3, &gradient_of(&g3, |x| [0.0, 0.0, -1.6 * x[2].sin()])).unwrap());

    assert!(matches!(
        injective_on_grid(&sphere(&[12, 8]), &vec![ZERO3; 96]),
        Err(Error::UnsupportedManifold(_))
    ));
}

#[test]
fn circle_injectivity_matches_monotone_lift() {
    let g = torus(&[24], TAU);
    let h = g.spacing(0);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut seen = [0usize; 2];
    for _ in 0..400 {
        let scale: f64 = rng.gen_range(0.0..0.3);
        let v: Vec<Vec3> = (0..g.len()).map(|_| [rng.gen_range(-scale..scale), 0.0, 0.0]).collect();
        // The lift x_i + v_i, continued one period, must strictly increase.
        let lift = |i: usize| (i as f64 + 0.5) * h + v[i % g.len()][0];
        let monotone = (0..g.len()).all(|i| lift(i + 1) > lift(i));
        assert_eq!(injective_on_grid(&g, &v).unwrap(), monotone);
        seen[monotone as usize] += 1;
    }
    assert!(seen[0] > 20 && seen[1] > 20, "{seen:?}");
}
