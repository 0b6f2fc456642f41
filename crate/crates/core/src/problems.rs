//! Built-in problem instances: a randomized harmonic oscillator and an SEIR
//! vaccination-scheduling problem with an integral running cost realized by
//! state augmentation.

use std::f64::consts::PI;

use crate::dynamics::ProblemDef;
use crate::error::Result;
use crate::param::ParamBox;
use crate::regularizer::RegularizerSpec;

/// Two-channel control of a randomly rotated, randomly shifted oscillator on
/// [0, 1]; the cost is the squared terminal distance to the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorConfig {
    /// Strong-convexity weight of the control penalty.
    pub alpha: f64,
    /// Per-channel sup-norm bound on the control.
    pub control_bound: f64,
    pub t_final: f64,
}

impl Default for OscillatorConfig {
    fn default() -> Self {
        Self { alpha: 1.0, control_bound: 3.0, t_final: 1.0 }
    }
}

/// State (x₁, x₂), parameters ξ = (rotation rate, drift₁, drift₂, start
/// offset₁, start offset₂):
///
/// ẋ = [0, −ξ₁; ξ₁, 0]x + u + (ξ₂, ξ₃),  x(0) = (1 + ξ₄, ξ₅),
/// F(x) = x₁² + x₂².
pub fn make_oscillator(cfg: &OscillatorConfig) -> Result<(ProblemDef, RegularizerSpec)> {
    let param_box = ParamBox::new(
        vec![0.0, -5.0, -5.0, -0.5, -0.5],
        vec![2.0 * PI, 5.0, 5.0, 0.5, 0.5],
    )?;
    let def = ProblemDef::builder(2, 2, param_box)
        .drift(|x, xi, out| {
            out[0] = -xi[0] * x[1] + xi[1];
            out[1] = xi[0] * x[0] + xi[2];
        })
        .drift_jacobian_vjp(|_, xi, p, out| {
            out[0] = xi[0] * p[1];
            out[1] = -xi[0] * p[0];
        })
        .control_matrix(|_, _, out| {
            out[0] = 1.0;
            out[1] = 0.0;
            out[2] = 0.0;
            out[3] = 1.0;
        })
        .terminal_cost(
            |x, _| x[0] * x[0] + x[1] * x[1],
            |x, _, out| {
                out[0] = 2.0 * x[0];
                out[1] = 2.0 * x[1];
            },
        )
        .initial_state(|xi, out| {
            out[0] = 1.0 + xi[3];
            out[1] = xi[4];
        })
        .build();
    let spec = RegularizerSpec::uniform_box(cfg.alpha, 0.0, 2, -cfg.control_bound, cfg.control_bound)?;
    Ok((def, spec))
}

/// Vaccination scheduling on an SEIR model over [0, 20], minimizing the
/// integral of the infected count plus a quadratic control cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaccinationConfig {
    pub alpha: f64,
    /// Upper bound of the vaccination-rate box [0, control_bound].
    pub control_bound: f64,
    pub t_final: f64,
    /// Relative half-width of the parameter box around the nominal rates.
    pub sigma: f64,
}

impl Default for VaccinationConfig {
    fn default() -> Self {
        Self { alpha: 2.0, control_bound: 0.9, t_final: 20.0, sigma: 0.15 }
    }
}

/// Nominal parameter rates (a, b, c, d, e, g): disease death, birth,
/// incidence, natural death, infection, recovery.
pub const VACCINATION_NOMINAL: [f64; 6] = [0.2, 0.525, 0.001, 0.5, 0.5, 0.1];

/// Initial compartment sizes (S₀, E₀, I₀) and the total including the
/// removed group, N₀ = S₀ + E₀ + I₀ + R₀.
pub const VACCINATION_INITIAL: [f64; 4] = [1000.0, 100.0, 50.0, 1165.0];

/// Augmented state (S, E, I, N, z) with ż = I, so the integral cost is the
/// terminal value of z. The removed-compartment equation is dropped: no
/// retained state depends on it.
///
/// S' = bN − dS − cSI − uS,  E' = cSI − (e + d)E,  I' = eE − (g + a + d)I,
/// N' = (b − d)N − aI.
pub fn make_vaccination(cfg: &VaccinationConfig) -> Result<(ProblemDef, RegularizerSpec)> {
    let nominal = VACCINATION_NOMINAL;
    let lo: Vec<f64> = nominal.iter().map(|&v| (1.0 - cfg.sigma) * v).collect();
    let hi: Vec<f64> = nominal.iter().map(|&v| (1.0 + cfg.sigma) * v).collect();
    let param_box = ParamBox::new(lo, hi)?;
    let def = ProblemDef::builder(5, 1, param_box)
        .drift(|x, xi, out| {
            let (s, e, i, n) = (x[0], x[1], x[2], x[3]);
            let (a, b, c, d, ee, g) = (xi[0], xi[1], xi[2], xi[3], xi[4], xi[5]);
            out[0] = b * n - d * s - c * s * i;
            out[1] = c * s * i - (ee + d) * e;
            out[2] = ee * e - (g + a + d) * i;
            out[3] = (b - d) * n - a * i;
            out[4] = i;
        })
        .drift_jacobian_vjp(|x, xi, p, out| {
            let (s, i) = (x[0], x[2]);
            let (a, b, c, d, ee, g) = (xi[0], xi[1], xi[2], xi[3], xi[4], xi[5]);
            out[0] = (-d - c * i) * p[0] + c * i * p[1];
            out[1] = -(ee + d) * p[1] + ee * p[2];
            out[2] = -c * s * p[0] + c * s * p[1] - (g + a + d) * p[2] - a * p[3] + p[4];
            out[3] = b * p[0] + (b - d) * p[3];
            out[4] = 0.0;
        })
        .control_matrix(|x, _, out| {
            out.fill(0.0);
            out[0] = -x[0];
        })
        .control_matrix_jacobian_vjp(|_, _, u, p, out| {
            out.fill(0.0);
            out[0] = -u[0] * p[0];
        })
        .terminal_cost(|x, _| x[4], |_, _, out| {
            out.fill(0.0);
            out[4] = 1.0;
        })
        .initial_state(|_, out| {
            out[0] = VACCINATION_INITIAL[0];
            out[1] = VACCINATION_INITIAL[1];
            out[2] = VACCINATION_INITIAL[2];
            out[3] = VACCINATION_INITIAL[3];
            out[4] = 0.0;
        })
        .build();
    let spec = RegularizerSpec::uniform_box(cfg.alpha, 0.0, 1, 0.0, cfg.control_bound)?;
    Ok((def, spec))
}
