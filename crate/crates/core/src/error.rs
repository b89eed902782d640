use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid order k = {k} for dimension {dim}")]
    InvalidOrder { k: usize, dim: usize },

    #[error("phase {value} outside the admissible range ({lower}, {upper})")]
    PhaseOutOfRange { value: f64, lower: f64, upper: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("grid too coarse: h = {h} exceeds {limit}")]
    GridTooCoarse { h: f64, limit: f64 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("barrier construction failed: {0}")]
    BarrierFailure(String),

    #[error("linear solve failed with residual {residual:e}")]
    LinearSolveFailure { residual: f64 },

    /// Carries the best iterate's nodal values.
    #[error("newton did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonFailure {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("line search stagnated at residual {residual:e}")]
    StagnationFailure { residual: f64 },

    #[error("continuation stalled at t = {last_t} (step floor reached)")]
    ContinuationFailure { last_t: f64 },

    #[error("perron iteration stagnated with gap {gap:e} after {sweeps} sweeps")]
    PerronFailure { gap: f64, sweeps: usize },

    #[error("envelope search radius {radius} below required {required}")]
    EnvelopeWindowTooSmall { radius: f64, required: f64 },

    #[error("not a subsolution at node {node}: defect {defect:e}")]
    NotASubsolution { node: usize, defect: f64 },

    #[error("not a supersolution at node {node}: defect {defect:e}")]
    NotASupersolution { node: usize, defect: f64 },

    #[error("boundary ordering violated at boundary point {index}: excess {excess:e}")]
    BoundaryOrderViolated { index: usize, excess: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code for reports and CLI output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidMatrix(_) => "InvalidMatrix",
            Error::InvalidOrder { .. } => "InvalidOrder",
            Error::PhaseOutOfRange { .. } => "PhaseOutOfRange",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::InvalidDomain(_) => "InvalidDomain",
            Error::BarrierFailure(_) => "BarrierFailure",
            Error::LinearSolveFailure { .. } => "LinearSolveFailure",
            Error::NewtonFailure { .. } => "NewtonFailure",
            Error::StagnationFailure { .. } => "StagnationFailure",
            Error::ContinuationFailure { .. } => "ContinuationFailure",
            Error::PerronFailure { .. } => "PerronFailure",
            Error::EnvelopeWindowTooSmall { .. } => "EnvelopeWindowTooSmall",
            Error::NotASubsolution { .. } => "NotASubsolution",
            Error::NotASupersolution { .. } => "NotASupersolution",
            Error::BoundaryOrderViolated { .. } => "BoundaryOrderViolated",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
