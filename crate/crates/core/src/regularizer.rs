//! The control regularizer ψ and the proximity operator of its
//! non-quadratic part.
//!
//! ψ(u) = (α/2)‖u‖² + β‖u‖_{L¹} + I_box(u), with all norms weighted by Δt.
//! ψ_α denotes ψ minus its α-quadratic part; its prox factorizes entrywise
//! into a soft-threshold followed by a clamp onto the per-channel box.

use crate::control::Control;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerSpec {
    /// Strong-convexity weight of the quadratic term, α > 0.
    pub alpha: f64,
    /// L¹ weight, β ≥ 0.
    pub beta: f64,
    /// Per-channel lower bounds (may be −∞).
    pub lower: Vec<f64>,
    /// Per-channel upper bounds (may be +∞).
    pub upper: Vec<f64>,
}

impl RegularizerSpec {
    pub fn new(alpha: f64, beta: f64, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::invalid("regularizer", format!("alpha = {alpha} must be positive")));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::invalid("regularizer", format!("beta = {beta} must be nonnegative")));
        }
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid("regularizer", "box bounds must be nonempty and equally long"));
        }
        for (j, (&l, &h)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(Error::invalid(
                    "regularizer",
                    format!("box channel {j} is empty or NaN: [{l}, {h}]"),
                ));
            }
        }
        Ok(Self { alpha, beta, lower, upper })
    }

    /// Same interval `[lo, hi]` on every channel.
    pub fn uniform_box(alpha: f64, beta: f64, channels: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(alpha, beta, vec![lo; channels], vec![hi; channels])
    }

    pub fn channels(&self) -> usize {
        self.lower.len()
    }

    /// Sup-norm bound of the feasible box: max_j max(|lo_j|, |hi_j|).
    /// Infinite when the box is unbounded.
    pub fn sup_bound(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &h)| l.abs().max(h.abs()))
            .fold(0.0, f64::max)
    }

    pub fn in_box(&self, u: &Control) -> bool {
        let m = self.channels();
        u.values().chunks_exact(m).all(|row| {
            row.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&l, &h))| v >= l && v <= h)
        })
    }
}

/// ψ(u): `(α/2)‖u‖² + β‖u‖_{L¹}` inside the box, +∞ outside.
pub fn psi_value(u: &Control, spec: &RegularizerSpec) -> f64 {
    assert_eq!(u.grid().channels(), spec.channels(), "channel mismatch");
    if !spec.in_box(u) {
        return f64::INFINITY;
    }
    let sq = u.weighted_dot(u);
    0.5 * spec.alpha * sq + spec.beta * u.weighted_l1()
}

/// ψ_α(u) = ψ(u) − (α/2)‖u‖²: the part handled by the prox.
pub fn psi_alpha_value(u: &Control, spec: &RegularizerSpec) -> f64 {
    assert_eq!(u.grid().channels(), spec.channels(), "channel mismatch");
    if !spec.in_box(u) {
        return f64::INFINITY;
    }
    spec.beta * u.weighted_l1()
}

/// Scalar soft-threshold: shrink `x` towards zero by `t`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// prox of γψ_α at `v`, entrywise `clamp(soft_threshold(v, γβ), lo, hi)`.
///
/// Exact: the 1-D objective ½(x−v)² + γβ|x| + I_{[lo,hi]} is convex, so the
/// box-constrained minimizer is the clamp of the unconstrained one. The Δt
/// weight multiplies the quadratic and the L¹ term alike, hence cancels.
pub fn prox_psi_alpha(v: &Control, gamma: f64, spec: &RegularizerSpec) -> Control {
    assert!(gamma > 0.0, "prox step gamma must be positive, got {gamma}");
    assert_eq!(v.grid().channels(), spec.channels(), "channel mismatch");
    let m = spec.channels();
    let t = gamma * spec.beta;
    let mut out = v.clone();
    for row in out.values_mut().chunks_exact_mut(m) {
        for (j, x) in row.iter_mut().enumerate() {
            *x = soft_threshold(*x, t).clamp(spec.lower[j], spec.upper[j]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlGrid;

    fn grid(q: usize, m: usize) -> ControlGrid {
        ControlGrid::new(1.0, q, m).unwrap()
    }

    #[test]
    fn psi_of_zero_is_zero() {
        let spec = RegularizerSpec::uniform_box(1.0, 0.5, 2, -1.0, 1.0).unwrap();
        let u = Control::zeros(grid(4, 2));
        assert_eq!(psi_value(&u, &spec), 0.0);
    }

    #[test]
    fn psi_outside_box_is_infinite() {
        let spec = RegularizerSpec::uniform_box(1.0, 0.0, 1, -1.0, 1.0).unwrap();
        let mut u = Control::zeros(grid(3, 1));
        u.values_mut()[1] = 1.5;
        assert_eq!(psi_value(&u, &spec), f64::INFINITY);
    }

    #[test]
    fn psi_quadratic_term() {
        // alpha = 2, beta = 0, u ≡ 1 on [0,1]: ψ = (2/2)·1 = 1 for any q.
        for q in [1, 10, 33] {
            let spec = RegularizerSpec::uniform_box(2.0, 0.0, 1, -2.0, 2.0).unwrap();
            let u = Control::constant(grid(q, 1), &[1.0]);
            assert!((psi_value(&u, &spec) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn prox_is_pure_projection_without_l1() {
        let spec = RegularizerSpec::uniform_box(1.0, 0.0, 1, -3.0, 3.0).unwrap();
        let v = Control::constant(grid(2, 1), &[5.0]);
        let p = prox_psi_alpha(&v, 1.0, &spec);
        assert_eq!(p.values(), &[3.0, 3.0]);
    }

    #[test]
    fn prox_shrinks_then_clamps() {
        // γβ = 0.5, box [−1, 1]: v = 0.8 → 0.3, v = 2 → 1.
        let spec = RegularizerSpec::uniform_box(1.0, 0.5, 1, -1.0, 1.0).unwrap();
        let mut v = Control::zeros(grid(2, 1));
        v.values_mut()[0] = 0.8;
        v.values_mut()[1] = 2.0;
        let p = prox_psi_alpha(&v, 1.0, &spec);
        assert!((p.values()[0] - 0.3).abs() < 1e-15);
        assert!((p.values()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn prox_handles_box_not_containing_zero() {
        let spec = RegularizerSpec::uniform_box(2.0, 0.1, 1, 0.2, 0.9).unwrap();
        let mut v = Control::zeros(grid(1, 1));
        v.values_mut()[0] = -4.0;
        let p = prox_psi_alpha(&v, 1.0, &spec);
        assert_eq!(p.values()[0], 0.2);
    }

    #[test]
    fn prox_ignores_grid_resolution() {
        let spec = RegularizerSpec::uniform_box(1.0, 0.3, 1, -1.0, 1.0).unwrap();
        let vals = [0.9, -0.2, 0.5];
        let coarse = Control::from_values(grid(3, 1), vals.to_vec()).unwrap();
        let fine_grid = ControlGrid::new(10.0, 3, 1).unwrap();
        let fine = Control::from_values(fine_grid, vals.to_vec()).unwrap();
        let pc = prox_psi_alpha(&coarse, 0.7, &spec);
        let pf = prox_psi_alpha(&fine, 0.7, &spec);
        assert_eq!(pc.values(), pf.values());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(RegularizerSpec::uniform_box(0.0, 0.0, 1, -1.0, 1.0).is_err());
        assert!(RegularizerSpec::uniform_box(1.0, -0.1, 1, -1.0, 1.0).is_err());
        assert!(RegularizerSpec::uniform_box(1.0, 0.0, 1, 1.0, -1.0).is_err());
    }

    #[test]
    fn unbounded_boxes_are_accepted() {
        let spec =
            RegularizerSpec::uniform_box(1.0, 0.2, 1, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert_eq!(spec.sup_bound(), f64::INFINITY);
        let mut v = Control::zeros(grid(1, 1));
        v.values_mut()[0] = 7.0;
        let p = prox_psi_alpha(&v, 1.0, &spec);
        assert!((p.values()[0] - 6.8).abs() < 1e-15);
    }
}
