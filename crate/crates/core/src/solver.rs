//! Proximal-gradient solver for the strongly convex composite SAA problem.
//!
//! Iterates `u⁺ = prox_{γψ_α}(u − γ(∇ĝ_N(u) + αu))` and stops when the
//! fixed-point residual at unit step (the criticality measure) falls below
//! tolerance; critical points are exactly the fixed points of that map, for
//! every step length.

use crate::control::Control;
use crate::ensemble::{criticality_from_gradient, EnsembleProblem};
use crate::error::{Error, Result};
use crate::regularizer::{prox_psi_alpha, psi_alpha_value, psi_value};
use crate::sampling::Provenance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    /// Constant step length; errors out if the composite objective rises.
    Fixed { gamma: f64 },
    /// Armijo-style halving on the smooth-part upper bound, with mild
    /// regrowth after accepted steps.
    Backtracking { gamma0: f64, shrink: f64, growth: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop once the criticality measure is at or below this value.
    pub tol: f64,
    pub max_iters: usize,
    pub step_mode: StepMode,
    /// Momentum with adaptive restart. Changes iteration counts, not the
    /// minimizer: the composite objective is strongly convex.
    pub acceleration: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 10_000,
            step_mode: StepMode::Backtracking { gamma0: 1.0, shrink: 0.5, growth: 1.1 },
            acceleration: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::invalid("solver options", format!("tol = {} must be positive", self.tol)));
        }
        match self.step_mode {
            StepMode::Fixed { gamma } if gamma.is_nan() || gamma <= 0.0 => {
                Err(Error::invalid("solver options", format!("fixed step gamma = {gamma} must be positive")))
            }
            StepMode::Backtracking { gamma0, shrink, growth } => {
                let ok = gamma0 > 0.0 && shrink > 0.0 && shrink < 1.0 && growth >= 1.0;
                if !ok {
                    return Err(Error::invalid(
                        "solver options",
                        format!("backtracking needs gamma0 > 0, 0 < shrink < 1 ≤ growth; got ({gamma0}, {shrink}, {growth})"),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Step-length bookkeeping over one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSummary {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    pub last: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub control: Control,
    /// Composite objective at `control`, recomputed at exit.
    pub value: f64,
    /// Criticality measure at `control`.
    pub criticality: f64,
    /// Accepted prox-gradient steps.
    pub iterations: usize,
    pub converged: bool,
    pub steps: StepSummary,
    /// Strong-convexity weight the solve ran with.
    pub alpha: f64,
    /// Provenance of the sample set that defined the objective.
    pub provenance: Provenance,
    /// Composite objective per iterate (including the start point).
    pub objective_history: Vec<f64>,
    /// Criticality per iterate.
    pub criticality_history: Vec<f64>,
}

struct LineSearch {
    gamma: f64,
    shrink: f64,
    growth: f64,
    backtracking: bool,
    min_gamma: f64,
    summary: StepSummary,
}

impl LineSearch {
    fn new(mode: StepMode) -> Self {
        let (gamma, shrink, growth, backtracking) = match mode {
            StepMode::Fixed { gamma } => (gamma, 1.0, 1.0, false),
            StepMode::Backtracking { gamma0, shrink, growth } => (gamma0, shrink, growth, true),
        };
        Self {
            gamma,
            shrink,
            growth,
            backtracking,
            min_gamma: 1e-18,
            summary: StepSummary { initial: gamma, min: gamma, max: gamma, last: gamma, backtracks: 0 },
        }
    }

    fn note(&mut self, gamma: f64) {
        self.summary.min = self.summary.min.min(gamma);
        self.summary.max = self.summary.max.max(gamma);
        self.summary.last = gamma;
    }

    /// One prox-gradient step from `z` with gradient `grad` and smooth value
    /// `smooth_z`. Returns the accepted iterate and its smooth value.
    fn step(
        &mut self,
        ep: &EnsembleProblem,
        z: &Control,
        grad: &Control,
        smooth_z: f64,
    ) -> Result<(Control, f64)> {
        let spec = ep.regularizer();
        loop {
            let mut shifted = z.clone();
            shifted.axpy(-self.gamma, grad);
            let candidate = prox_psi_alpha(&shifted, self.gamma, spec);
            let mut diff = candidate.clone();
            diff.axpy(-1.0, z);
            let upper = smooth_z
                + grad.weighted_dot(&diff)
                + diff.weighted_dot(&diff) / (2.0 * self.gamma)
                + 1e-12 * (1.0 + smooth_z.abs());
            let smooth_candidate = ep.smooth_value(&candidate)?;
            if smooth_candidate <= upper {
                self.note(self.gamma);
                let accepted = self.gamma;
                if self.backtracking {
                    self.gamma = accepted * self.growth;
                }
                return Ok((candidate, smooth_candidate));
            }
            if !self.backtracking {
                // A fixed step that violates the decrease bound will not
                // contract; surface it instead of looping.
                return Err(Error::StepTooLarge { gamma: self.gamma });
            }
            self.gamma *= self.shrink;
            self.summary.backtracks += 1;
            if self.gamma < self.min_gamma {
                return Err(Error::LineSearchFailed { min_step: self.min_gamma });
            }
        }
    }
}

/// Minimize the composite SAA objective from `u0`.
///
/// `u0` must be feasible (ψ finite). Returns the first iterate whose
/// criticality is at or below `opts.tol`, or a non-converged report after
/// `max_iters` steps.
pub fn solve(ep: &EnsembleProblem, u0: &Control, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let spec = ep.regularizer();
    assert_eq!(u0.grid().channels(), ep.problem().control_dim(), "control channel mismatch");

    if !psi_value(u0, spec).is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut u = u0.clone();
    let mut smooth = ep.smooth_value(&u)?;
    if !smooth.is_finite() {
        return Err(Error::NonFiniteObjective);
    }

    let mut search = LineSearch::new(opts.step_mode);
    let mut objective_history = Vec::new();
    let mut criticality_history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    // Momentum state (only read when acceleration is on).
    let mut y = u.clone();
    let mut momentum_t = 1.0f64;

    let mut grad = ep.saa_smooth_gradient(&u)?;
    let mut criticality = criticality_from_gradient(&u, &grad, spec);

    for _ in 0..opts.max_iters {
        objective_history.push(smooth + psi_alpha_value(&u, spec));
        criticality_history.push(criticality);
        if criticality <= opts.tol {
            converged = true;
            break;
        }

        let (next, next_smooth) = if opts.acceleration {
            let same_point = y.values() == u.values();
            let (grad_y, smooth_y) = if same_point {
                (grad.clone(), smooth)
            } else {
                (ep.saa_smooth_gradient(&y)?, ep.smooth_value(&y)?)
            };
            let (candidate, cand_smooth) = search.step(ep, &y, &grad_y, smooth_y)?;

            // Adaptive restart: drop momentum when it points uphill and
            // redo the step from the plain iterate.
            let mut yc = y.clone();
            yc.axpy(-1.0, &candidate);
            let mut cu = candidate.clone();
            cu.axpy(-1.0, &u);
            let (candidate, cand_smooth) = if yc.weighted_dot(&cu) > 0.0 {
                momentum_t = 1.0;
                search.step(ep, &u, &grad, smooth)?
            } else {
                (candidate, cand_smooth)
            };
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum_t * momentum_t).sqrt());
            let beta = (momentum_t - 1.0) / t_next;
            let mut y_next = candidate.clone();
            let mut delta = candidate.clone();
            delta.axpy(-1.0, &u);
            y_next.axpy(beta, &delta);
            momentum_t = t_next;
            y = y_next;
            (candidate, cand_smooth)
        } else {
            search.step(ep, &u, &grad, smooth)?
        };

        u = next;
        smooth = next_smooth;
        iterations += 1;
        grad = ep.saa_smooth_gradient(&u)?;
        criticality = criticality_from_gradient(&u, &grad, spec);
    }

    if !converged && criticality <= opts.tol {
        // max_iters landed exactly on a critical point.
        converged = true;
    }
    if converged && objective_history.len() == iterations {
        // Record the final iterate when the loop exited by stepping.
        objective_history.push(smooth + psi_alpha_value(&u, spec));
        criticality_history.push(criticality);
    }

    let value = ep.saa_objective(&u)?;
    Ok(SolveReport {
        control: u,
        value,
        criticality,
        iterations,
        converged,
        steps: search.summary,
        alpha: spec.alpha,
        provenance: ep.samples().provenance(),
        objective_history,
        criticality_history,
    })
}
