use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh: {0}")]
    Mesh(String),

    #[error("msh line {line}: {msg}")]
    Msh { line: usize, msg: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("ABC degeneracy: σkψ_t ≥ 1 (1 - σkψ_t = {value:e}) on facet {facet}")]
    AbcDegeneracy { facet: usize, value: f64 },

    #[error("zero gradient: incidence angle undefined")]
    ZeroGradient,

    #[error("indefinite detected: curvature pᵀAp = {curvature:e} at iteration {iteration}")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("max iterations ({iterations}) reached, relative residual {residual:e}")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("solver breakdown: {0}")]
    SolverBreakdown(String),

    #[error("fixed-point divergence at step {step}: increment {increment:e} after {iterations} iterations")]
    FixedPointDivergence {
        step: usize,
        iterations: usize,
        increment: f64,
    },

    #[error("step {step} (t = {t:e} s): {source}")]
    AtStep {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("node mismatch: {count} node(s) of the truncated mesh have no counterpart, first: {first:?}")]
    NodeMismatch { count: usize, first: Vec<usize> },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerical scheme as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::AtStep { source, .. } => source.is_numerical(),
            Error::AbcDegeneracy { .. }
            | Error::Indefinite { .. }
            | Error::MaxIterations { .. }
            | Error::SolverBreakdown(_)
            | Error::FixedPointDivergence { .. }
            | Error::ZeroGradient => true,
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
