//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The forward or adjoint sweep produced a non-finite state.
    #[error("integration diverged: non-finite value at node {node}")]
    IntegrationDiverged { node: usize },

    /// Divergence inside an ensemble evaluation, tagged with the sample.
    #[error("integration diverged for sample {sample}: non-finite value at node {node}")]
    SampleDiverged { sample: usize, node: usize },

    #[error("parameter box is empty: lo[{index}] = {lo} > hi[{index}] = {hi}")]
    EmptyBox { index: usize, lo: f64, hi: f64 },

    #[error("Sobol dimension {dim} exceeds the direction-number table (max {max})")]
    SobolDimension { dim: usize, max: usize },

    #[error("invalid {what}: {why}")]
    InvalidInput { what: &'static str, why: String },

    #[error("objective is not finite at the initial control")]
    NonFiniteObjective,

    #[error("objective increased under fixed step gamma = {gamma}; use backtracking or a smaller step")]
    StepTooLarge { gamma: f64 },

    #[error("line search failed: step length shrank below {min_step:e}")]
    LineSearchFailed { min_step: f64 },

    #[error("rate fit needs at least two distinct sample sizes")]
    FitUnderdetermined,

    #[error("rate fit: mean {mean} at N = {n} is not positive")]
    FitNonpositiveMean { n: usize, mean: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach the offending sample index to a divergence error.
    pub(crate) fn tag_sample(self, sample: usize) -> Error {
        match self {
            Error::IntegrationDiverged { node } => Error::SampleDiverged { sample, node },
            other => other,
        }
    }

    pub(crate) fn invalid(what: &'static str, why: impl Into<String>) -> Error {
        Error::InvalidInput { what, why: why.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
