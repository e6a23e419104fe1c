//! # ma-continuity
//!
//! A numerical laboratory for the optimal-transport Monge-Ampere equation
//! with cost `c = d²/2` on compact manifolds.
//!
//! The crate marches the continuity path `ρ(t) = (1-t)μ + tν` from the
//! trivial problem `μ → μ` (solved by `u = 0`) to `μ → ν` with damped Newton
//! iterations, and checks the Hessian a priori machinery along the way:
//!
//! - Wasserstein closeness squeezes `|∇u|` (exact network-simplex OT,
//!   Kantorovich potentials, fitted squeeze constants),
//! - the Korevaar test function and the dichotomy bound
//!   `Λ/δ₀² ≤ C₁ + C₂Λ^{3n-1}` trap the largest eigenvalue `Λ` of
//!   `w = D²u + D²c` below `C₃` while the gradient stays below `δ₀`.
//!
//! ## Modules
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`geometry`] | flat tori `Tⁿ`, an equatorial band chart of `S²`, distances, exp/log, cost tensors |
//! | [`fields`] | grids, finite differences, densities, the path `ρ(t)`, gauge projection |
//! | [`wasserstein`] | exact OT (network simplex), Sinkhorn, `W₁`/`W₂`, Kantorovich potentials |
//! | [`transport`] | transport map `T`, metric `w`, Monge-Ampere residual, pushforward checks |
//! | [`solver`] | linearized operator, Newton steps, the continuity march |
//! | [`estimates`] | `Λ`, `|w|`, `C₃`, dichotomy split, guard, gradient/`L²` bound, Korevaar checks |
//! | [`runner`] | experiment configs, subcommand orchestration, CSV/JSON/SVG artifacts |
//!
//! ## Quick start
//!
//! ```no_run
//! use std::sync::Arc;
//! use ma_continuity::fields::{DensitySpec, density_from_spec};
//! use ma_continuity::geometry::{Manifold, ManifoldGrid};
//! use ma_continuity::solver::{continuity_solve, SolverConfig};
//! use ma_continuity::estimates::{ConstantsLedger, LedgerInputs};
//! use ma_continuity::transport::TransportProblem;
//!
//! let grid = Arc::new(ManifoldGrid::new(Manifold::torus(&[std::f64::consts::TAU; 2]), &[32, 32]).unwrap());
//! let mu = density_from_spec(&grid, &DensitySpec::Uniform).unwrap();
//! let nu = density_from_spec(&grid, &DensitySpec::GaussianBump {
//!     center: vec![3.0, 3.0], width: 1.0, amplitude: 0.2 }).unwrap();
//! let problem = TransportProblem::new(mu, nu).unwrap();
//! let ledger = ConstantsLedger::assemble(&problem, &LedgerInputs::default()).unwrap();
//! let run = continuity_solve(&problem, &SolverConfig::default(), &ledger).unwrap();
//! println!("Λ_max along the path: {}", run.lambda_max());
//! ```

// Index loops mirror the tensor notation; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimates;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod runner;
pub mod solver;
pub mod transport;
pub mod wasserstein;

pub use error::{Error, Result};
