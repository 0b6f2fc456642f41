//! Risk-neutral optimal control of ODE ensembles by sample average
//! approximation.
//!
//! One piecewise-constant control is shared across N parameterized copies of
//! an affine-control ODE; the sampled expectation of a terminal cost plus a
//! strongly convex regularizer is minimized by a proximal-gradient method
//! whose stopping test is the prox fixed-point residual (the criticality
//! measure). The study harness reproduces the O(1/√N) mean convergence of
//! SAA optimal values and critical points on two built-in problems, fitting
//! log-log slopes over replicated runs.
//!
//! Per-sample work parallelizes over the ensemble (feature `parallel`, on by
//! default); reductions use a fixed-order pairwise tree, so every result is
//! bitwise independent of the thread count.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod param;
pub mod problems;
pub mod regularizer;
pub mod sampling;
pub mod solver;
pub mod study;
pub mod theory;

mod reduce;
mod sobol;
mod svg;

pub use control::{Control, ControlGrid};
pub use dynamics::{
    eval_objective_sample, gradient_sample, gradient_with_adjoint, integrate_forward,
    AdjointTrajectory, ProblemDef, StateTrajectory,
};
pub use ensemble::{reference_criticality, EnsembleProblem};
pub use error::{Error, Result};
pub use param::ParamBox;
pub use regularizer::{prox_psi_alpha, psi_value, RegularizerSpec};
pub use sampling::{
    derive_seed, nominal_point, nominal_sample, sample_iid, sample_sobol, GeneratorKind,
    Provenance, SampleSet,
};
pub use solver::{solve, SolveReport, SolverOptions, StepMode};
pub use study::{
    build_problem, fit_rate, run_nominal, run_reference, run_study, summarize, ProblemChoice,
    StudyConfig, StudyOutput, StudyRecord,
};
pub use theory::{covering_bound_log2, entropy_integral_bound, radius, rate_bound, RateKind, TheoryConstants};

/// Run `f` inside a dedicated thread pool of the given size. Useful for
/// pinning the parallelism of a study; results do not depend on the choice.
#[cfg(feature = "parallel")]
pub fn with_thread_pool<T, F>(threads: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool construction")
        .install(f)
}
