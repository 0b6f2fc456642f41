//! Sample-average objective, smooth-part gradient, and criticality measures
//! over a sample set.
//!
//! Per-sample work (forward integration plus adjoint) runs in parallel when
//! the `parallel` feature is enabled, one task per sample; the reduction is
//! a fixed-order pairwise tree, so results are bitwise identical at any
//! thread count.

use crate::control::Control;
use crate::dynamics::{eval_objective_sample, gradient_sample, ProblemDef};
use crate::error::Result;
use crate::reduce::{pairwise_sum, pairwise_sum_rows};
use crate::regularizer::{prox_psi_alpha, psi_value, RegularizerSpec};
use crate::sampling::SampleSet;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// An SAA instance: one problem definition, one regularizer, and the sample
/// set the expectation is averaged over. The reference problem is the same
/// object built with the reference sample set.
#[derive(Debug, Clone)]
pub struct EnsembleProblem {
    problem: ProblemDef,
    regularizer: RegularizerSpec,
    samples: SampleSet,
}

impl EnsembleProblem {
    pub fn new(problem: ProblemDef, regularizer: RegularizerSpec, samples: SampleSet) -> Result<Self> {
        if samples.dim() != problem.param_box().dim() {
            return Err(crate::error::Error::invalid(
                "ensemble",
                format!(
                    "sample dimension {} does not match parameter dimension {}",
                    samples.dim(),
                    problem.param_box().dim()
                ),
            ));
        }
        if regularizer.channels() != problem.control_dim() {
            return Err(crate::error::Error::invalid(
                "ensemble",
                format!(
                    "regularizer channels {} do not match control dimension {}",
                    regularizer.channels(),
                    problem.control_dim()
                ),
            ));
        }
        Ok(Self { problem, regularizer, samples })
    }

    pub fn problem(&self) -> &ProblemDef {
        &self.problem
    }

    pub fn regularizer(&self) -> &RegularizerSpec {
        &self.regularizer
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Evaluate `f` on every sample, in index order. Errors carry the index
    /// of the lowest offending sample.
    fn map_samples<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&[f64]) -> Result<T> + Sync,
    {
        #[cfg(feature = "parallel")]
        {
            let results: Vec<Result<T>> = (0..self.samples.len())
                .into_par_iter()
                .map(|i| f(self.samples.point(i)).map_err(|e| e.tag_sample(i)))
                .collect();
            let mut out = Vec::with_capacity(results.len());
            for r in results {
                out.push(r?);
            }
            Ok(out)
        }
        #[cfg(not(feature = "parallel"))]
        {
            let mut out = Vec::with_capacity(self.samples.len());
            for i in 0..self.samples.len() {
                out.push(f(self.samples.point(i)).map_err(|e| e.tag_sample(i))?);
            }
            Ok(out)
        }
    }

    /// `(1/N) Σ T(u, ξⁱ)`: the sampled expectation without any regularizer.
    pub fn mean_objective(&self, u: &Control) -> Result<f64> {
        let values = self.map_samples(|xi| eval_objective_sample(&self.problem, u, xi))?;
        Ok(pairwise_sum(&values) / values.len() as f64)
    }

    /// Smooth part of the composite objective: `(1/N) Σ T + (α/2)‖u‖²`.
    pub fn smooth_value(&self, u: &Control) -> Result<f64> {
        let mean = self.mean_objective(u)?;
        Ok(mean + 0.5 * self.regularizer.alpha * u.weighted_dot(u))
    }

    /// Full SAA objective `(1/N) Σ T(u, ξⁱ) + ψ(u)`; +∞ outside the box.
    pub fn saa_objective(&self, u: &Control) -> Result<f64> {
        let psi = psi_value(u, &self.regularizer);
        if !psi.is_finite() {
            return Ok(f64::INFINITY);
        }
        let mean = self.mean_objective(u)?;
        Ok(mean + psi)
    }

    /// Gradient of the smooth part, `(1/N) Σ ∇T(u, ξⁱ) + α·u`, in the
    /// weighted inner product. Fixed-order reduction over samples.
    pub fn saa_smooth_gradient(&self, u: &Control) -> Result<Control> {
        let rows = self.map_samples(|xi| gradient_sample(&self.problem, u, xi).map(Control::into_values))?;
        let mut mean = pairwise_sum_rows(&rows);
        let n = rows.len() as f64;
        for (g, uv) in mean.iter_mut().zip(u.values()) {
            *g = *g / n + self.regularizer.alpha * uv;
        }
        Control::from_values(u.grid(), mean)
    }

    /// Fixed-point residual norm at unit prox step:
    /// `‖u − prox_{ψ_α}(u − ∇ĝ_N(u) − αu)‖`. Zero exactly at critical points.
    pub fn criticality(&self, u: &Control) -> Result<f64> {
        let g = self.saa_smooth_gradient(u)?;
        Ok(criticality_from_gradient(u, &g, &self.regularizer))
    }
}

/// Criticality residual given an already computed smooth gradient.
pub(crate) fn criticality_from_gradient(u: &Control, smooth_grad: &Control, spec: &RegularizerSpec) -> f64 {
    let mut shifted = u.clone();
    shifted.axpy(-1.0, smooth_grad);
    let prox = prox_psi_alpha(&shifted, 1.0, spec);
    u.distance(&prox)
}

/// Criticality of the reference problem at `u`, i.e. [`EnsembleProblem::criticality`]
/// over the reference sample set.
pub fn reference_criticality(
    problem: &ProblemDef,
    regularizer: &RegularizerSpec,
    reference_samples: &SampleSet,
    u: &Control,
) -> Result<f64> {
    let ep = EnsembleProblem::new(problem.clone(), regularizer.clone(), reference_samples.clone())?;
    ep.criticality(u)
}
