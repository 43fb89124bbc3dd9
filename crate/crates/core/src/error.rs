use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids ({left} vs {right} points per side)")]
    GridMismatch { left: usize, right: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("flow-map Jacobian is singular: |det| = {det:e} at node {node}")]
    SingularJacobian { det: f64, node: usize },

    #[error("Neumann series diverges: accumulated gradient integral {ratio} >= 1")]
    SeriesDiverged { ratio: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("interface polygon self-intersects (edges {first} and {second})")]
    SelfIntersection { first: usize, second: usize },

    #[error("contraction violated: ||A - Id||_inf = {norm} exceeds threshold {threshold}")]
    ContractionViolated { norm: f64, threshold: f64 },

    #[error("initial data incompatible with the divergence constraint (mismatch {mismatch:e})")]
    CompatibilityViolated { mismatch: f64 },

    #[error(
        "Picard iteration did not converge after {iterations} iterations (iterate gap {gap:e}); \
         density jump ratio {jump_ratio} vs jump cap {jump_cap}"
    )]
    PicardNoConvergence {
        iterations: usize,
        gap: f64,
        jump_ratio: f64,
        jump_cap: f64,
    },

    #[error("smallness integral {integral} exceeds cap {cap}")]
    SmallnessExceeded { integral: f64, cap: f64 },

    #[error("time step {dt} violates the advective CFL limit {limit}")]
    CflViolated { dt: f64, limit: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("snapshot format error at line {line}: {message}")]
    Snapshot { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
