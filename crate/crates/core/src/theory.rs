//! Closed-form bound evaluation: gradient-ball radius, covering-number and
//! entropy-integral bounds, and the N^{−1/2} mean rate bounds the studies
//! overlay on their empirical curves.
//!
//! Several constants (the covering constant, the gradient Lipschitz
//! constant, single-point deviation terms) are not computable from problem
//! data; they default to 1 and every emitted curve is to be read "up to
//! constants" — the falsifiable content is the N^{−1/2} shape.

use crate::control::{Control, ControlGrid};
use crate::dynamics::{integrate_forward, ProblemDef};
use crate::error::Result;
use crate::regularizer::RegularizerSpec;
use crate::sampling::sample_iid;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Problem constants feeding the bound formulas. All Lipschitz-type entries
/// are required to be at least 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConstants {
    /// Lipschitz bound for the dynamics and its state Jacobian.
    pub lip_dynamics: f64,
    /// Lipschitz bound for the terminal cost and its gradient.
    pub lip_cost: f64,
    /// Bound on the initial-state norm.
    pub initial_state_bound: f64,
    /// Sup-norm bound of the feasible control box.
    pub control_sup_bound: f64,
    /// Control dimension m.
    pub control_dim: usize,
    /// Strong-convexity weight of the regularizer.
    pub alpha: f64,
    /// Covering constant; not derivable from problem data.
    pub covering_rho: f64,
    /// Lipschitz constant of the objective gradient in the control;
    /// existence is guaranteed but no formula is available.
    pub lip_gradient: f64,
    /// Single-point standard deviation of the objective values.
    pub deviation_value: f64,
    /// Single-point deviation of the objective gradients.
    pub deviation_gradient: f64,
}

impl TheoryConstants {
    /// All free constants set to 1; `alpha`, `m`, and the control bound come
    /// from the regularizer.
    pub fn unit(regularizer: &RegularizerSpec) -> Self {
        Self {
            lip_dynamics: 1.0,
            lip_cost: 1.0,
            initial_state_bound: 1.0,
            control_sup_bound: regularizer.sup_bound().max(1.0),
            control_dim: regularizer.channels(),
            alpha: regularizer.alpha,
            covering_rho: 1.0,
            lip_gradient: 1.0,
            deviation_value: 1.0,
            deviation_gradient: 1.0,
        }
    }

    /// Derived Lipschitz constant of the per-sample objective:
    /// `√2 · L_F · L_f · e^{L_f}`. Always recomputed, never stored.
    pub fn lip_integrand(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.lip_cost * self.lip_dynamics * self.lip_dynamics.exp()
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("lip_dynamics", self.lip_dynamics),
            ("lip_cost", self.lip_cost),
            ("initial_state_bound", self.initial_state_bound),
            ("control_sup_bound", self.control_sup_bound),
            ("lip_gradient", self.lip_gradient),
        ];
        for (name, v) in checks {
            if !v.is_finite() || v < 1.0 {
                return Err(crate::error::Error::invalid("theory constants", format!("{name} = {v} must be ≥ 1")));
            }
        }
        let positive = self.alpha > 0.0 && self.covering_rho > 0.0;
        if !positive {
            return Err(crate::error::Error::invalid("theory constants", "alpha and covering_rho must be positive"));
        }
        Ok(())
    }
}

/// Radius of the ball containing every per-sample objective gradient:
/// returns `(R₀, R)` with
/// `R₀ = L_f(1 + L_F)e^{L_f}` and `R = R₀ + 6L_f²(1 + V₀)e^{2L_f r_ψ}R₀`.
pub fn radius(tc: &TheoryConstants) -> (f64, f64) {
    let r0 = tc.lip_dynamics * (1.0 + tc.lip_cost) * tc.lip_dynamics.exp();
    let amplification = 6.0
        * tc.lip_dynamics.powi(2)
        * (1.0 + tc.initial_state_bound)
        * (2.0 * tc.lip_dynamics * tc.control_sup_bound).exp();
    (r0, r0 + amplification * r0)
}

/// log₂ of the covering number of the critical-point container:
/// `ϱ√m · Rm/(αν)`.
pub fn covering_bound_log2(m: usize, r: f64, alpha: f64, nu: f64, rho: f64) -> f64 {
    assert!(nu > 0.0, "covering radius must be positive");
    rho * (m as f64).sqrt() * (r * m as f64) / (alpha * nu)
}

/// Closed-form bound on `∫₀^{D/2} √(ln(2·𝒩(ε))) dε` when
/// `𝒩(ε) ≤ 2^{c₁/ε}`: the value is `√(D/2)·(√(c₁ + D/2) + √c₁)`.
pub fn entropy_integral_bound(c1: f64, d: f64) -> f64 {
    assert!(c1 >= 0.0 && d > 0.0, "need c1 ≥ 0 and D > 0");
    let half = 0.5 * d;
    half.sqrt() * ((c1 + half).sqrt() + c1.sqrt())
}

/// Which mean rate is being bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    /// Optimal-value deviation `E|v̂_N − v*|`.
    Value,
    /// Criticality at SAA critical points `E[χ(u_N*)]`.
    Criticality,
}

/// Full right-hand side of the mean rate bound at sample size `n`:
///
/// `c₀/√N + (16√3 · L · r_ψ/√N) · (1 + ϱ√m·Rm/α)^{1/2}`,
///
/// with `L = L_T` and `c₀` the value deviation for [`RateKind::Value`], and
/// the gradient Lipschitz constant and gradient deviation for
/// [`RateKind::Criticality`].
pub fn rate_bound(tc: &TheoryConstants, n: usize, kind: RateKind) -> f64 {
    assert!(n >= 1, "sample size must be at least 1");
    let (lip, c0) = match kind {
        RateKind::Value => (tc.lip_integrand(), tc.deviation_value),
        RateKind::Criticality => (tc.lip_gradient, tc.deviation_gradient),
    };
    let (_, r) = radius(tc);
    let m = tc.control_dim as f64;
    let covering_term = tc.covering_rho * m.sqrt() * r * m / tc.alpha;
    let sqrt_n = (n as f64).sqrt();
    c0 / sqrt_n + 16.0 * 3.0f64.sqrt() * lip * tc.control_sup_bound / sqrt_n * (1.0 + covering_term).sqrt()
}

/// Numerical estimates of the Lipschitz-type constants for a concrete
/// problem, obtained by sampling parameters, feasible controls, and
/// trajectory states. These are sampled lower estimates clamped to 1, good
/// enough to anchor "up to constants" overlays; they are not certified
/// bounds.
pub fn estimate_constants(
    problem: &ProblemDef,
    regularizer: &RegularizerSpec,
    grid: ControlGrid,
    probes: usize,
    seed: u64,
) -> Result<TheoryConstants> {
    let n = problem.state_dim();
    let m = problem.control_dim();
    let samples = sample_iid(problem.param_box(), probes.max(2), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e57);

    let mut lip_dynamics = 1.0f64;
    let mut lip_cost = 1.0f64;
    let mut v0 = 1.0f64;

    let mut jac = vec![0.0; n * n];
    let mut basis = vec![0.0; n];
    let mut row = vec![0.0; n];
    let mut f1 = vec![0.0; n * m];
    let mut grad_f = vec![0.0; n];

    for xi in samples.iter_points() {
        let x0 = problem.initial_state(xi);
        v0 = v0.max(x0.iter().map(|v| v * v).sum::<f64>().sqrt());

        let mut u = Control::zeros(grid);
        for (j, v) in u.values_mut().iter_mut().enumerate() {
            let ch = j % m;
            let lo = regularizer.lower[ch].max(-1e3);
            let hi = regularizer.upper[ch].min(1e3);
            *v = lo + (hi - lo) * rng.random::<f64>();
        }
        let traj = integrate_forward(problem, &u, xi)?;
        let stride = (traj.node_count() / 8).max(1);
        for node in (0..traj.node_count()).step_by(stride) {
            let x = traj.state(node);
            let uk = u.interval((node / problem.substeps()).min(grid.intervals() - 1));

            // Frobenius norm of ∂f/∂x assembled row-wise from the VJPs.
            for i in 0..n {
                basis.fill(0.0);
                basis[i] = 1.0;
                problem.jacobian_vjp_into(x, uk, xi, &basis, &mut row);
                jac[i * n..(i + 1) * n].copy_from_slice(&row);
            }
            let frob = jac.iter().map(|v| v * v).sum::<f64>().sqrt();
            lip_dynamics = lip_dynamics.max(frob);

            problem.control_matrix_into(x, xi, &mut f1);
            let f1_norm = f1.iter().map(|v| v * v).sum::<f64>().sqrt();
            lip_dynamics = lip_dynamics.max(f1_norm);

            problem.terminal_cost_grad_into(x, xi, &mut grad_f);
            let g_norm = grad_f.iter().map(|v| v * v).sum::<f64>().sqrt();
            lip_cost = lip_cost.max(g_norm);
        }
    }

    Ok(TheoryConstants {
        lip_dynamics,
        lip_cost,
        initial_state_bound: v0,
        control_sup_bound: regularizer.sup_bound().max(1.0),
        control_dim: m,
        alpha: regularizer.alpha,
        covering_rho: 1.0,
        lip_gradient: 1.0,
        deviation_value: 1.0,
        deviation_gradient: 1.0,
    })
}
