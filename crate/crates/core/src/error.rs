use thiserror::Error;

use crate::fem::DiscreteTriple;
use crate::solver::StepReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tensor dimension {0} (expected 2 or 3)")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid yield surface: {0}")]
    InvalidYieldSurface(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("pointwise return mapping did not converge after {iterations} iterations (residual {residual:e})")]
    ReturnMapping { iterations: usize, residual: f64 },

    #[error("invalid history: {0}")]
    InvalidHistory(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("interval [{a}, {b}] outside sampled range [{t0}, {t1}]")]
    OutOfRange { a: f64, b: f64, t0: f64, t1: f64 },

    #[error("safe-load condition violated at t = {t}: {detail}")]
    UnsafeLoad { t: f64, detail: String },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error(
        "solver did not converge at t = {t}{} after {} iterations (equilibrium residual {:e})",
        .step.map(|s| format!(" (step {s})")).unwrap_or_default(),
        .report.iterations,
        .report.equilibrium_residual
    )]
    NonConvergence {
        t: f64,
        step: Option<usize>,
        triple: Box<DiscreteTriple>,
        report: Box<StepReport>,
    },

    #[error("initial state is not stable: {0}")]
    UnstableInitial(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
