//! On-disk artifacts of a run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::estimates::{lambda_field, ConstantsLedger, DichotomyReport, GuardVerdict};
use crate::geometry::ManifoldGrid;
use crate::linalg::{self, Mat3};
use crate::solver::{Certificate, ContinuityRun, PathState};
use crate::transport::{hessian_metric, transport_map, PushforwardReport};
use crate::{Error, Result};

pub const SCHEMA: u32 = 1;
pub const SUMMARY_FILE: &str = "run_summary.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    GuardViolated,
    VerificationFailed,
    SolverFailed,
    ConfigError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub manifold: String,
    pub dim: usize,
    pub resolution: Vec<usize>,
    pub h_max: f64,
}

impl GridInfo {
    pub fn of(grid: &ManifoldGrid) -> Self {
        let manifold = if grid.manifold().is_torus() { "torus" } else { "sphere" };
        Self { manifold: manifold.into(), dim: grid.dim(), resolution: grid.resolution().to_vec(), h_max: grid.h_max() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub states: usize,
    pub rejected_steps: usize,
    pub completed: bool,
    pub final_t: f64,
    pub final_residual: f64,
    pub lambda_max: f64,
    pub lambda_max_t: f64,
    pub lambda_min: f64,
    pub lambda_min_t: f64,
    pub grad_max: f64,
    pub min_eig_w: f64,
    pub newton_iters: usize,
    pub linear_iters: usize,
}

impl TraceSummary {
    pub fn of(run: &ContinuityRun) -> Option<Self> {
        let last = run.trace.last()?;
        let hi = run.trace.iter().fold(&run.trace[0], |b, s| if s.lambda_max > b.lambda_max { s } else { b });
        let lo = run.trace.iter().fold(&run.trace[0], |b, s| if s.lambda_max < b.lambda_max { s } else { b });
        Some(Self {
            states: run.trace.len(),
            rejected_steps: run.rejected_steps,
            completed: run.completed,
            final_t: last.t,
            final_residual: last.residual_inf,
            lambda_max: hi.lambda_max,
            lambda_max_t: hi.t,
            lambda_min: lo.lambda_max,
            lambda_min_t: lo.t,
            grad_max: run.grad_max(),
            min_eig_w: run.trace.iter().map(|s| s.min_eig_w).fold(f64::INFINITY, f64::min),
            newton_iters: run.trace.iter().map(|s| s.newton_iters).sum(),
            linear_iters: run.trace.iter().map(|s| s.linear_iters).sum(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuardSummary {
    pub counts: BTreeMap<String, usize>,
    /// First state in the warning band `(a, C₃]`.
    pub first_warning_t: Option<f64>,
    pub first_failure: Option<DichotomyReport>,
    pub first_unmet: Option<DichotomyReport>,
    pub last: Option<DichotomyReport>,
}

impl GuardSummary {
    pub fn of(reports: &[DichotomyReport]) -> Self {
        let mut counts = BTreeMap::new();
        for r in reports {
            *counts.entry(r.verdict.label().to_string()).or_insert(0) += 1;
        }
        Self {
            counts,
            first_warning_t: reports.iter().find(|r| r.verdict == GuardVerdict::Warning).map(|r| r.t),
            first_failure: reports.iter().find(|r| r.verdict.is_failure()).cloned(),
            first_unmet: reports.iter().find(|r| matches!(r.verdict, GuardVerdict::PreconditionUnmet { .. })).cloned(),
            last: reports.last().cloned(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WassersteinSummary {
    pub method: String,
    /// `false` for entropic estimates.
    pub exact: bool,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    /// `(t, W₂(μ, ρ(t)))`.
    pub path: Vec<(f64, f64)>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: u32,
    pub command: String,
    pub status: Status,
    pub exit_code: i32,
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub grid: Option<GridInfo>,
    pub ledger: Option<ConstantsLedger>,
    pub trace: Option<TraceSummary>,
    pub guard: Option<GuardSummary>,
    pub certificate: Option<Certificate>,
    pub wasserstein: Option<WassersteinSummary>,
    /// Pushforward check of the final map of a completed march.
    #[serde(default)]
    pub pushforward: Option<PushforwardReport>,
    /// Payload of a `verify` mode.
    pub verify: Option<serde_json::Value>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunSummary {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            schema: SCHEMA,
            command: command.into(),
            status: Status::Completed,
            exit_code: 0,
            error: None,
            config: config.clone(),
            grid: None,
            ledger: None,
            trace: None,
            guard: None,
            certificate: None,
            wasserstein: None,
            pushforward: None,
            verify: None,
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn record_run(&mut self, run: &ContinuityRun) {
        self.trace = TraceSummary::of(run);
        self.guard = Some(GuardSummary::of(&run.reports));
        self.certificate = Some(run.certificate.clone());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(SUMMARY_FILE), text + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|_| Error::MissingArtifacts(format!("{} not found", path.display())))?;
        let summary: Self = serde_json::from_str(&text)?;
        if summary.schema != SCHEMA {
            return Err(Error::MissingArtifacts(format!("unsupported summary schema {}", summary.schema)));
        }
        Ok(summary)
    }
}

/// `trace.csv`: one row per accepted state.
pub fn write_trace_csv(path: &Path, trace: &[PathState]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "residual_inf", "grad_max", "lambda_max", "min_eig_w", "newton_iters", "dt"])?;
    for s in trace {
        w.write_record([
            s.t.to_string(),
            s.residual_inf.to_string(),
            s.grad_max.to_string(),
            s.lambda_max.to_string(),
            s.min_eig_w.to_string(),
            s.newton_iters.to_string(),
            s.dt.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `Λ` at every grid point of a state.
pub fn lambda_values(state: &PathState) -> Result<Vec<f64>> {
    let grid = state.u.grid();
    let wf = hessian_metric(grid, &transport_map(&state.u)?)?;
    Ok(lambda_field(grid, &wf.w).values)
}

struct FieldRows {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    lambda: Vec<f64>,
}

fn field_rows(state: &PathState) -> Result<FieldRows> {
    let grid = state.u.grid();
    let n = grid.dim();
    let map = transport_map(&state.u)?;
    let wf = hessian_metric(grid, &map)?;
    let lambda = lambda_field(grid, &wf.w).values;
    let mut header: Vec<String> = (0..n).map(|a| format!("x{a}")).collect();
    header.extend(["u", "grad_norm", "lambda"].map(String::from));
    header.extend((0..n).map(|a| format!("w_{a}{a}")));
    let rows = (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            let w: &Mat3 = &wf.w[i];
            let mut row: Vec<String> = (0..n).map(|a| x[a].to_string()).collect();
            row.push(state.u.values()[i].to_string());
            row.push(linalg::norm(n, &map.gradient[i]).to_string());
            row.push(lambda[i].to_string());
            row.extend((0..n).map(|a| w[a][a].to_string()));
            row
        })
        .collect();
    Ok(FieldRows { header, rows, lambda })
}

/// `fields.csv` for the given state; 3D grids also get one file per slice of
/// the last axis. Returns the `Λ` field.
pub fn write_fields_csv(dir: &Path, state: &PathState) -> Result<Vec<f64>> {
    let grid = state.u.grid();
    let f = field_rows(state)?;
    let write = |path: &Path, rows: &mut dyn Iterator<Item = &Vec<String>>| -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&f.header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    };
    write(&dir.join("fields.csv"), &mut f.rows.iter())?;
    if grid.dim() == 3 {
        let slices = grid.resolution()[2];
        for k in 0..slices {
            let mut it = f.rows.iter().enumerate().filter(|(i, _)| grid.multi_index(*i)[2] == k).map(|(_, r)| r);
            write(&dir.join(format!("fields_slice_{k:03}.csv")), &mut it)?;
        }
    }
    Ok(f.lambda)
}

/// Piecewise-linear approximation of the viridis colormap.
fn color(v: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.25, [59.0, 82.0, 139.0]),
        (0.5, [33.0, 145.0, 140.0]),
        (0.75, [94.0, 201.0, 98.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let k = STOPS.iter().position(|(s, _)| *s >= v).unwrap_or(4).max(1);
    let ((s0, c0), (s1, c1)) = (STOPS[k - 1], STOPS[k]);
    let f = (v - s0) / (s1 - s0);
    let c: Vec<u8> = (0..3).map(|i| (c0[i] + f * (c1[i] - c0[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Self-contained SVG heatmap of a field on a 2D grid (first axis left to
/// right, second axis bottom to top).
pub fn heatmap_svg(grid: &ManifoldGrid, values: &[f64], title: &str) -> Result<String> {
    if grid.dim() != 2 {
        return Err(Error::InvalidGrid("heatmaps need a 2D grid".into()));
    }
    let (nx, ny) = (grid.resolution()[0], grid.resolution()[1]);
    let cell = (512 / nx.max(ny)).max(1);
    let (w, h) = (nx * cell, ny * cell);
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), v| (l.min(*v), u.max(*v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        w + 90,
        h + 40,
        w + 90,
        h + 40
    );
    let _ = writeln!(s, r#"<text x="0" y="16" font-family="monospace" font-size="14">{title}</text>"#);
    let _ = writeln!(s, r#"<g transform="translate(0,28)" shape-rendering="crispEdges">"#);
    for (i, v) in values.iter().enumerate() {
        let m = grid.multi_index(i);
        let (x, y) = (m[0] * cell, (ny - 1 - m[1]) * cell);
        let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}"/>"#, color((v - lo) / span));
    }
    for k in 0..=20 {
        let y = h - (k * h) / 20;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="16" height="{}" fill="{}"/>"#,
            w + 10,
            y.saturating_sub(h / 20),
            (h / 20).max(1),
            color(k as f64 / 20.0)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="10" font-family="monospace" font-size="11">{hi:.4e}</text>"#, w + 30);
    let _ = writeln!(s, r#"<text x="{}" y="{h}" font-family="monospace" font-size="11">{lo:.4e}</text>"#, w + 30);
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}
