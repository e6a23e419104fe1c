//! Experiment configuration: strict TOML with dotted-path overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::estimates::{C12Mode, LedgerInputs};
use crate::fields::{density_from_spec, DensityField, DensitySpec};
use crate::geometry::{Manifold, ManifoldGrid};
use crate::solver::SolverConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifold: ManifoldBlock,
    pub mu: DensitySpec,
    pub nu: DensitySpec,
    #[serde(default)]
    pub solver: SolverConfig,
    pub ledger: LedgerBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub wasserstein: WassersteinBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    /// Seed for randomized density families that do not carry their own.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldBlock {
    Torus { periods: Vec<f64>, resolution: Vec<usize> },
    /// Equatorial band of the sphere; `resolution = [longitude, latitude]`.
    Sphere { radius: f64, margin: f64, resolution: Vec<usize> },
}

/// A number, or a keyword standing for a computed value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Value(f64),
    Keyword(String),
}

impl Setting {
    fn resolve(&self, key: &str, keyword: &str) -> Result<Option<f64>> {
        match self {
            Setting::Value(v) => Ok(Some(*v)),
            Setting::Keyword(k) if k == keyword => Ok(None),
            Setting::Keyword(k) => Err(Error::Config(format!("ledger.{key} must be a number or \"{keyword}\", got \"{k}\""))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerBlock {
    /// Admission budget, or `"measured"`.
    pub c_bar: Setting,
    /// Gradient budget, or `"auto"`.
    pub delta0: Setting,
    pub c12_mode: C12Mode,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub c2: Option<f64>,
    #[serde(default)]
    pub semiconvexity: Option<f64>,
    #[serde(default)]
    pub klm_c: Option<f64>,
    #[serde(default)]
    pub bbbb_c: Option<f64>,
    #[serde(default)]
    pub working_radius: Option<f64>,
}

impl LedgerBlock {
    pub fn inputs(&self) -> Result<LedgerInputs> {
        Ok(LedgerInputs {
            c_bar: self.c_bar.resolve("c_bar", "measured")?,
            semiconvexity: self.semiconvexity,
            delta0: self.delta0.resolve("delta0", "auto")?,
            c1: self.c1,
            c2: self.c2,
            c12_mode: self.c12_mode,
            klm_c: self.klm_c,
            bbbb_c: self.bbbb_c,
            working_radius: self.working_radius,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    /// Relative to the working directory.
    pub dir: PathBuf,
    pub formats: Vec<Format>,
    /// Add exact `W₁`/`W₂` to solve summaries.
    pub wasserstein: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), formats: vec![Format::Json, Format::Csv, Format::Svg], wasserstein: true }
    }
}

impl OutputBlock {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtMethod {
    Exact,
    Sinkhorn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WassersteinBlock {
    pub method: OtMethod,
    /// Entropic regularization, as a fraction of the squared diameter.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Path times at which `W₂(μ, ρ(t))` is also measured.
    pub path_times: Vec<f64>,
}

impl Default for WassersteinBlock {
    fn default() -> Self {
        Self { method: OtMethod::Exact, epsilon: 1e-3, max_iter: 5000, path_times: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    /// Path time of the state checked by `verify cl1`.
    pub cl1_t: f64,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        Self { cl1_t: 1.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    /// Each variant is a list of `key=value` overrides of this config.
    pub variants: Vec<Vec<String>>,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {value}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

/// Applies one `a.b.c=value` override to a TOML table.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override key '{path}' has an empty segment")));
    }
    let mut table = root;
    for k in &keys[..keys.len() - 1] {
        let entry = table.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{path}': '{k}' is not a section")))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text with overrides; relative density CSV paths resolve
    /// against `base`.
    pub fn from_toml(text: &str, overrides: &[String], base: &Path) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: ExperimentConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, overrides, &base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for spec in [&mut self.mu, &mut self.nu] {
            if let DensitySpec::Csv { path } = spec {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        for spec in [&mut self.mu, &mut self.nu] {
            if let DensitySpec::RandomFourier { seed, .. } = spec {
                if seed.is_none() {
                    *seed = self.seed;
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.ledger.inputs()?;
        let res = match &self.manifold {
            ManifoldBlock::Torus { periods, resolution } => {
                if periods.len() != resolution.len() || !(1..=3).contains(&periods.len()) {
                    return Err(Error::Config("manifold.periods and manifold.resolution need 1 to 3 matching entries".into()));
                }
                if periods.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
                    return Err(Error::Config("manifold.periods must be positive".into()));
                }
                resolution
            }
            ManifoldBlock::Sphere { radius, margin, resolution } => {
                if !(*radius > 0.0) || !(*margin > 0.0) || resolution.len() != 2 {
                    return Err(Error::Config("sphere needs radius > 0, margin > 0 and two resolutions".into()));
                }
                resolution
            }
        };
        if res.iter().any(|r| *r < 8 || *r > 4096) {
            return Err(Error::Config("manifold.resolution entries must lie in [8, 4096]".into()));
        }
        for (name, spec) in [("mu", &self.mu), ("nu", &self.nu)] {
            match spec {
                DensitySpec::Csv { path } if !path.is_file() => {
                    return Err(Error::Config(format!("{name}.path {} does not exist", path.display())));
                }
                DensitySpec::RandomFourier { seed: None, .. } => {
                    return Err(Error::Config(format!("{name} is random_fourier but no seed is set")));
                }
                _ => {}
            }
        }
        if !(self.wasserstein.epsilon > 0.0) || self.wasserstein.max_iter == 0 {
            return Err(Error::Config("wasserstein.epsilon and wasserstein.max_iter must be positive".into()));
        }
        if self.wasserstein.path_times.iter().any(|t| !(0.0..=1.0).contains(t)) || !(0.0..=1.0).contains(&self.verify.cl1_t) {
            return Err(Error::Config("path times must lie in [0, 1]".into()));
        }
        if self.sweep.workers == Some(0) {
            return Err(Error::Config("sweep.workers must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<ManifoldGrid>> {
        let (m, res) = match &self.manifold {
            ManifoldBlock::Torus { periods, resolution } => (Manifold::torus(periods), resolution),
            ManifoldBlock::Sphere { radius, margin, resolution } => (Manifold::sphere_chart(*radius, *margin)?, resolution),
        };
        Ok(Arc::new(ManifoldGrid::new(m, res)?))
    }

    pub fn densities(&self, grid: &Arc<ManifoldGrid>) -> Result<(DensityField, DensityField)> {
        Ok((density_from_spec(grid, &self.mu)?, density_from_spec(grid, &self.nu)?))
    }
}
