use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("points are too close to the cut locus: d = {distance} >= {limit}")]
    CutLocusProximity { distance: f64, limit: f64 },

    #[error("tangent vector too long: |v| = {norm} >= injectivity radius {limit}")]
    VectorTooLong { norm: f64, limit: f64 },

    #[error("sphere chart with latitude bound {lat_max} rad violates the 0.9/1.1 chart equivalence")]
    ChartEquivalence { lat_max: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("operation not supported on this manifold: {0}")]
    UnsupportedManifold(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("density is not normalized (mass = {mass})")]
    NotNormalized { mass: f64 },

    #[error("exact OT limited to {cap} atoms per side, got {got}")]
    SizeExceeded { cap: usize, got: usize },

    #[error("marginal masses differ: {source_mass} vs {target_mass}")]
    InfeasibleMass { source_mass: f64, target_mass: f64 },

    #[error("network simplex failed: {0}")]
    NetworkSimplex(String),

    #[error("displacement {displacement} exceeds the cut-locus guard {limit}")]
    DisplacementTooLarge { displacement: f64, limit: f64 },

    #[error("w is not positive definite at {count} grid points (min eigenvalue {min_eig:e})")]
    NotCConvex { count: usize, min_eig: f64 },

    #[error("transport Jacobian is not positive at {count} grid points")]
    JacobianSignFlip { count: usize },

    #[error("linear solve stalled at relative residual {residual:e} after {iterations} iterations")]
    LinearSolveStalled { residual: f64, iterations: usize },

    #[error("damping underflow: no acceptable step down to alpha = {alpha:e}")]
    DampingFailed { alpha: f64 },

    #[error("u is not semi-convex: min Hessian eigenvalue {min_eig} < -{bound}")]
    NotSemiconvex { min_eig: f64, bound: f64 },

    #[error("Newton iteration at t = {t} failed after {iterations} iterations (best residual {residual:e}): {reason}")]
    NewtonDiverged { t: f64, iterations: usize, residual: f64, reason: String, best: Box<crate::solver::PathState> },

    #[error("guard violated at t = {}: Λ_max = {} ({})", .report.t, .report.lambda_max, .report.verdict.label())]
    GuardViolated { report: Box<crate::estimates::DichotomyReport>, partial: Box<crate::solver::ContinuityRun> },

    #[error("step size underflow at t = {t}: Δt = {dt:e}")]
    StepUnderflow { t: f64, dt: f64, partial: Box<crate::solver::ContinuityRun> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing run artifacts: {0}")]
    MissingArtifacts(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
