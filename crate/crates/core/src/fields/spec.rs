use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{normalize_density, DensityField};
use crate::geometry::{Manifold, ManifoldGrid};
use crate::linalg::Vec3;
use crate::{Error, Result};

/// Named density families. Every family is normalized to unit mass after
/// evaluation, so amplitudes shape the density but not its total mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform,
    /// `f = amplitude · cos(Σ_a 2π k_a x_a / L_a)` with integer wavenumbers
    /// `k` (default: 1 along the first axis).
    CosineBump {
        amplitude: f64,
        #[serde(default)]
        wavenumber: Vec<i64>,
    },
    /// `f = amplitude · Σ exp(-|x - c|² / (2 width²))`, summed over periodic
    /// images on the torus; geodesic distance on the sphere chart.
    GaussianBump { center: Vec<f64>, width: f64, amplitude: f64 },
    /// Random trigonometric polynomial on a torus with wavenumbers
    /// `|k_a| ≤ modes`, coefficients decaying like `1/|k|²` and `sup|f|`
    /// scaled to `amplitude`. Deterministic for a fixed seed; a missing seed
    /// is filled from the experiment seed.
    RandomFourier {
        amplitude: f64,
        modes: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Log-density loaded from CSV: one column per grid axis holding the
    /// integer index, then the log-density; a header row is required.
    Csv { path: PathBuf },
}

fn cosine(grid: &ManifoldGrid, amplitude: f64, wavenumber: &[i64]) -> Result<Vec<f64>> {
    let n = grid.dim();
    let mut k = vec![0i64; n];
    if wavenumber.is_empty() {
        k[0] = 1;
    } else if wavenumber.len() == n {
        k.copy_from_slice(wavenumber);
    } else {
        return Err(Error::Config(format!("cosine_bump wavenumber needs {n} entries")));
    }
    Ok(grid
        .points()
        .iter()
        .map(|x| {
            let phase: f64 = (0..n).map(|a| std::f64::consts::TAU * k[a] as f64 * x[a] / grid.extent(a)).sum();
            amplitude * phase.cos()
        })
        .collect())
}

fn gaussian(grid: &ManifoldGrid, center: &[f64], width: f64, amplitude: f64) -> Result<Vec<f64>> {
    let n = grid.dim();
    if center.len() != n {
        return Err(Error::Config(format!("gaussian_bump center needs {n} entries")));
    }
    if !(width > 0.0) {
        return Err(Error::Config(format!("gaussian_bump width {width}")));
    }
    let mut c: Vec3 = [0.0; 3];
    c[..n].copy_from_slice(center);
    let m = grid.manifold();
    Ok(grid
        .points()
        .iter()
        .map(|x| {
            let sum = match m {
                Manifold::Torus { dim, periods } => {
                    let images = 3usize.pow(*dim as u32);
                    (0..images)
                        .map(|mut code| {
                            let mut d2 = 0.0;
                            for a in 0..*dim {
                                let shift = (code % 3) as f64 - 1.0;
                                code /= 3;
                                let d = crate::geometry::min_image(x[a] - c[a], periods[a]) + shift * periods[a];
                                d2 += d * d;
                            }
                            (-d2 / (2.0 * width * width)).exp()
                        })
                        .sum::<f64>()
                }
                Manifold::SphereChart { .. } => {
                    let d = m.distance(x, &c);
                    (-d * d / (2.0 * width * width)).exp()
                }
            };
            amplitude * sum
        })
        .collect())
}

fn random_fourier(grid: &ManifoldGrid, amplitude: f64, modes: usize, seed: Option<u64>) -> Result<Vec<f64>> {
    let Some(seed) = seed else {
        return Err(Error::Config("random_fourier needs a seed".into()));
    };
    if !grid.manifold().is_torus() {
        return Err(Error::UnsupportedManifold("random_fourier is defined on tori".into()));
    }
    if modes == 0 {
        return Err(Error::Config("random_fourier needs modes >= 1".into()));
    }
    let n = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = 2 * modes + 1;
    let mut terms = Vec::new();
    for code in 0..side.pow(n as u32) {
        let mut k = [0i64; 3];
        let mut c = code;
        for ka in k.iter_mut().take(n) {
            *ka = (c % side) as i64 - modes as i64;
            c /= side;
        }
        let k2: i64 = k.iter().map(|v| v * v).sum();
        if k2 == 0 {
            continue;
        }
        let coef = rng.gen_range(-1.0..1.0) / k2 as f64;
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        terms.push((k, coef, phase));
    }
    let raw: Vec<f64> = grid
        .points()
        .iter()
        .map(|x| {
            terms
                .iter()
                .map(|(k, c, p)| {
                    let arg: f64 = (0..n).map(|a| std::f64::consts::TAU * k[a] as f64 * x[a] / grid.extent(a)).sum();
                    c * (arg + p).cos()
                })
                .sum()
        })
        .collect();
    let peak = raw.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(raw);
    }
    Ok(raw.into_iter().map(|v| amplitude * v / peak).collect())
}

/// Reads a log-density CSV (`i0[,i1[,i2]],log_density` with a header row).
pub fn read_density_csv(grid: &ManifoldGrid, path: &Path) -> Result<Vec<f64>> {
    let n = grid.dim();
    let mut out = vec![f64::NAN; grid.len()];
    let mut reader = csv::Reader::from_path(path)?;
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != n + 1 {
            return Err(Error::Config(format!("density CSV rows need {} columns", n + 1)));
        }
        let mut idx = [0usize; 3];
        for a in 0..n {
            let v: usize = rec[a]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad grid index '{}'", &rec[a])))?;
            if v >= grid.resolution()[a] {
                return Err(Error::Config(format!("grid index {v} out of range on axis {a}")));
            }
            idx[a] = v;
        }
        let f: f64 = rec[n]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad log-density '{}'", &rec[n])))?;
        out[grid.linear_index(&idx)] = f;
    }
    if out.iter().any(|v| v.is_nan()) {
        return Err(Error::Config("density CSV does not cover every grid point".into()));
    }
    Ok(out)
}

pub fn write_density_csv(field: &DensityField, path: &Path) -> Result<()> {
    let grid = field.grid();
    let n = grid.dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..n).map(|a| format!("i{a}")).collect();
    header.push("log_density".into());
    w.write_record(&header)?;
    for (i, f) in field.log_density().iter().enumerate() {
        let m = grid.multi_index(i);
        let mut row: Vec<String> = m[..n].iter().map(|v| v.to_string()).collect();
        row.push(format!("{f:.17e}"));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Evaluates a density family on the grid and normalizes it.
pub fn density_from_spec(grid: &Arc<ManifoldGrid>, spec: &DensitySpec) -> Result<DensityField> {
    let f = match spec {
        DensitySpec::Uniform => vec![0.0; grid.len()],
        DensitySpec::CosineBump { amplitude, wavenumber } => cosine(grid, *amplitude, wavenumber)?,
        DensitySpec::GaussianBump { center, width, amplitude } => gaussian(grid, center, *width, *amplitude)?,
        DensitySpec::RandomFourier { amplitude, modes, seed } => random_fourier(grid, *amplitude, *modes, *seed)?,
        DensitySpec::Csv { path } => read_density_csv(grid, path)?,
    };
    Ok(normalize_density(&DensityField::new(grid.clone(), f)?))
}
