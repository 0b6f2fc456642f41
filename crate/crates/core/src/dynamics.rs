//! Forward RK4 integration of affine-control dynamics and the exact
//! gradient of the terminal cost via the discrete adjoint.
//!
//! The state equation is `ẋ = f₀(x, ξ) + f₁(x, ξ) u(t)` with `u` held
//! constant on each control interval. Gradients are computed by reverse-mode
//! transposition of the RK4 steps, so they are exact (to rounding) for the
//! discretized objective the solver minimizes — a criticality measure built
//! from them can be driven to machine tolerance.

use std::sync::Arc;

use crate::control::{Control, ControlGrid};
use crate::error::{Error, Result};
use crate::param::ParamBox;

/// `f(x, ξ, out)`: writes an ℝⁿ value.
pub type VectorFieldFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `f₁(x, ξ, out)`: writes the n×m control-input matrix, row-major.
pub type ControlMatrixFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(x, ξ, p, out)`: writes `(∂f₀/∂x)ᵀ p`.
pub type DriftVjpFn = Arc<dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(x, ξ, u, p, out)`: writes `(∂(f₁ u)/∂x)ᵀ p` for the interval value `u`.
pub type ControlMatrixVjpFn = Arc<dyn Fn(&[f64], &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `F(x, ξ)`.
pub type TerminalCostFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// `(x, ξ, out)`: writes `∇ₓF(x, ξ)`.
pub type TerminalCostGradFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(ξ, out)`: writes the initial state `x₀(ξ)`.
pub type InitialStateFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A parameterized control problem instance: dynamics, terminal cost with
/// analytic gradient, initial-state map, and the parameter box.
///
/// State Jacobians enter only through vector-Jacobian products, supplied
/// analytically per problem.
#[derive(Clone)]
pub struct ProblemDef {
    state_dim: usize,
    control_dim: usize,
    param_box: ParamBox,
    substeps: usize,
    drift: VectorFieldFn,
    drift_vjp: DriftVjpFn,
    control_matrix: ControlMatrixFn,
    control_matrix_vjp: ControlMatrixVjpFn,
    terminal_cost: TerminalCostFn,
    terminal_cost_grad: TerminalCostGradFn,
    initial_state: InitialStateFn,
}

impl std::fmt::Debug for ProblemDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemDef")
            .field("state_dim", &self.state_dim)
            .field("control_dim", &self.control_dim)
            .field("param_dim", &self.param_box.dim())
            .field("substeps", &self.substeps)
            .finish_non_exhaustive()
    }
}

impl ProblemDef {
    pub fn builder(state_dim: usize, control_dim: usize, param_box: ParamBox) -> ProblemDefBuilder {
        assert!(state_dim >= 1 && control_dim >= 1, "dimensions must be at least 1");
        ProblemDefBuilder {
            def: ProblemDef {
                state_dim,
                control_dim,
                param_box,
                substeps: 1,
                drift: Arc::new(|_, _, out| out.fill(0.0)),
                drift_vjp: Arc::new(|_, _, _, out| out.fill(0.0)),
                control_matrix: Arc::new(|_, _, out| out.fill(0.0)),
                control_matrix_vjp: Arc::new(|_, _, _, _, out| out.fill(0.0)),
                terminal_cost: Arc::new(|_, _| 0.0),
                terminal_cost_grad: Arc::new(|_, _, out| out.fill(0.0)),
                initial_state: Arc::new(|_, out| out.fill(0.0)),
            },
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn param_box(&self) -> &ParamBox {
        &self.param_box
    }

    /// RK4 substeps per control interval.
    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Same problem with a different substep count.
    pub fn with_substeps(mut self, substeps: usize) -> Self {
        assert!(substeps >= 1, "substep count must be at least 1");
        self.substeps = substeps;
        self
    }

    pub fn terminal_cost(&self, x: &[f64], xi: &[f64]) -> f64 {
        (self.terminal_cost)(x, xi)
    }

    pub fn initial_state(&self, xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        (self.initial_state)(xi, &mut out);
        out
    }

    /// Combined right-hand side `f₀(x, ξ) + f₁(x, ξ) u`.
    pub fn rhs(&self, x: &[f64], u: &[f64], xi: &[f64], out: &mut [f64]) {
        let (n, m) = (self.state_dim, self.control_dim);
        let mut f1 = vec![0.0; n * m];
        self.rhs_with_scratch(x, u, xi, &mut f1, out);
    }

    fn rhs_with_scratch(&self, x: &[f64], u: &[f64], xi: &[f64], f1: &mut [f64], out: &mut [f64]) {
        (self.drift)(x, xi, out);
        (self.control_matrix)(x, xi, f1);
        let m = self.control_dim;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &f1[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(u) {
                acc += a * b;
            }
            *o += acc;
        }
    }

    /// `out = (∂f/∂x)(x, u, ξ)ᵀ p`, the full right-hand-side VJP.
    fn jacobian_vjp(&self, x: &[f64], u: &[f64], xi: &[f64], p: &[f64], tmp: &mut [f64], out: &mut [f64]) {
        (self.drift_vjp)(x, xi, p, out);
        (self.control_matrix_vjp)(x, xi, u, p, tmp);
        for (o, t) in out.iter_mut().zip(tmp.iter()) {
            *o += t;
        }
    }

    /// VJP of the combined right-hand side, for constant estimation.
    pub(crate) fn jacobian_vjp_into(&self, x: &[f64], u: &[f64], xi: &[f64], p: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; self.state_dim];
        self.jacobian_vjp(x, u, xi, p, &mut tmp, out);
    }

    pub(crate) fn control_matrix_into(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        (self.control_matrix)(x, xi, out);
    }

    pub(crate) fn terminal_cost_grad_into(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        (self.terminal_cost_grad)(x, xi, out);
    }

    /// `grad += f₁(x, ξ)ᵀ w`.
    fn input_vjp(&self, x: &[f64], xi: &[f64], w: &[f64], f1: &mut [f64], grad: &mut [f64]) {
        (self.control_matrix)(x, xi, f1);
        let m = self.control_dim;
        for (j, g) in grad.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, v) in w.iter().enumerate() {
                acc += f1[i * m + j] * v;
            }
            *g += acc;
        }
    }
}

pub struct ProblemDefBuilder {
    def: ProblemDef,
}

impl ProblemDefBuilder {
    pub fn drift(mut self, f: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.def.drift = Arc::new(f);
        self
    }

    pub fn drift_jacobian_vjp(
        mut self,
        f: impl Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.def.drift_vjp = Arc::new(f);
        self
    }

    pub fn control_matrix(mut self, f: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.def.control_matrix = Arc::new(f);
        self
    }

    pub fn control_matrix_jacobian_vjp(
        mut self,
        f: impl Fn(&[f64], &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.def.control_matrix_vjp = Arc::new(f);
        self
    }

    pub fn terminal_cost(
        mut self,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.def.terminal_cost = Arc::new(f);
        self.def.terminal_cost_grad = Arc::new(grad);
        self
    }

    pub fn initial_state(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.def.initial_state = Arc::new(f);
        self
    }

    pub fn substeps(mut self, s: usize) -> Self {
        assert!(s >= 1, "substep count must be at least 1");
        self.def.substeps = s;
        self
    }

    pub fn build(self) -> ProblemDef {
        self.def
    }
}

/// States at every RK4 node, shape (q·s + 1) × n.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    grid: ControlGrid,
    substeps: usize,
    state_dim: usize,
    states: Vec<f64>,
}

impl StateTrajectory {
    pub fn grid(&self) -> ControlGrid {
        self.grid
    }

    pub fn node_count(&self) -> usize {
        self.grid.intervals() * self.substeps + 1
    }

    pub fn node_time(&self, node: usize) -> f64 {
        node as f64 * self.grid.dt() / self.substeps as f64
    }

    pub fn state(&self, node: usize) -> &[f64] {
        &self.states[node * self.state_dim..(node + 1) * self.state_dim]
    }

    pub fn terminal_state(&self) -> &[f64] {
        self.state(self.node_count() - 1)
    }
}

/// Costates at every RK4 node; the terminal costate is `∇ₓF(x(t_f), ξ)` and
/// interior entries are gradients of the discretized cost with respect to
/// the node state.
#[derive(Debug, Clone)]
pub struct AdjointTrajectory {
    grid: ControlGrid,
    substeps: usize,
    state_dim: usize,
    costates: Vec<f64>,
}

impl AdjointTrajectory {
    pub fn node_count(&self) -> usize {
        self.grid.intervals() * self.substeps + 1
    }

    pub fn costate(&self, node: usize) -> &[f64] {
        &self.costates[node * self.state_dim..(node + 1) * self.state_dim]
    }

    pub fn terminal_costate(&self) -> &[f64] {
        self.costate(self.node_count() - 1)
    }
}

struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    xs: Vec<f64>,
    f1: Vec<f64>,
}

impl Rk4Scratch {
    fn new(n: usize, m: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            xs: vec![0.0; n],
            f1: vec![0.0; n * m],
        }
    }
}

fn stage_state(xs: &mut [f64], x: &[f64], k: &[f64], scale: f64) {
    for ((s, &xv), &kv) in xs.iter_mut().zip(x).zip(k) {
        *s = xv + scale * kv;
    }
}

fn rk4_step(problem: &ProblemDef, x: &mut [f64], u: &[f64], xi: &[f64], h: f64, w: &mut Rk4Scratch) {
    problem.rhs_with_scratch(x, u, xi, &mut w.f1, &mut w.k1);
    stage_state(&mut w.xs, x, &w.k1, 0.5 * h);
    problem.rhs_with_scratch(&w.xs, u, xi, &mut w.f1, &mut w.k2);
    stage_state(&mut w.xs, x, &w.k2, 0.5 * h);
    problem.rhs_with_scratch(&w.xs, u, xi, &mut w.f1, &mut w.k3);
    stage_state(&mut w.xs, x, &w.k3, h);
    problem.rhs_with_scratch(&w.xs, u, xi, &mut w.f1, &mut w.k4);
    for (i, xv) in x.iter_mut().enumerate() {
        *xv += h / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
    }
}

/// Classic RK4 with step `Δt / s` applied interval by interval, `u` constant
/// per interval. Returns the states at every node.
pub fn integrate_forward(problem: &ProblemDef, u: &Control, xi: &[f64]) -> Result<StateTrajectory> {
    let grid = u.grid();
    assert_eq!(grid.channels(), problem.control_dim(), "control channel count mismatch");
    assert_eq!(xi.len(), problem.param_box().dim(), "parameter dimension mismatch");

    let n = problem.state_dim();
    let s = problem.substeps();
    let q = grid.intervals();
    let h = grid.dt() / s as f64;
    let mut states = vec![0.0; (q * s + 1) * n];

    let mut x = vec![0.0; n];
    (problem.initial_state)(xi, &mut x);
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::IntegrationDiverged { node: 0 });
    }
    states[..n].copy_from_slice(&x);

    let mut scratch = Rk4Scratch::new(n, problem.control_dim());
    for k in 0..q {
        let uk = u.interval(k);
        for sub in 0..s {
            rk4_step(problem, &mut x, uk, xi, h, &mut scratch);
            let node = k * s + sub + 1;
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::IntegrationDiverged { node });
            }
            states[node * n..(node + 1) * n].copy_from_slice(&x);
        }
    }

    Ok(StateTrajectory { grid, substeps: s, state_dim: n, states })
}

/// `T(u, ξ) = F(x(t_f, ξ), ξ)` for the discretized trajectory.
pub fn eval_objective_sample(problem: &ProblemDef, u: &Control, xi: &[f64]) -> Result<f64> {
    let traj = integrate_forward(problem, u, xi)?;
    Ok(problem.terminal_cost(traj.terminal_state(), xi))
}

/// Gradient of [`eval_objective_sample`] in the weighted inner product,
/// computed by the discrete adjoint of the RK4 sweep.
pub fn gradient_sample(problem: &ProblemDef, u: &Control, xi: &[f64]) -> Result<Control> {
    gradient_with_adjoint(problem, u, xi).map(|(g, _)| g)
}

/// As [`gradient_sample`], also returning the costate trajectory.
pub fn gradient_with_adjoint(
    problem: &ProblemDef,
    u: &Control,
    xi: &[f64],
) -> Result<(Control, AdjointTrajectory)> {
    let traj = integrate_forward(problem, u, xi)?;
    let grid = u.grid();
    let n = problem.state_dim();
    let m = problem.control_dim();
    let s = problem.substeps();
    let q = grid.intervals();
    let h = grid.dt() / s as f64;
    let nodes = q * s + 1;

    let mut costates = vec![0.0; nodes * n];
    let mut p = vec![0.0; n];
    (problem.terminal_cost_grad)(traj.terminal_state(), xi, &mut p);
    costates[(nodes - 1) * n..].copy_from_slice(&p);

    let mut grad = vec![0.0; q * m];
    let mut w = Rk4Scratch::new(n, m);
    let mut x2 = vec![0.0; n];
    let mut x3 = vec![0.0; n];
    let mut x4 = vec![0.0; n];
    let mut kb1 = vec![0.0; n];
    let mut kb2 = vec![0.0; n];
    let mut kb3 = vec![0.0; n];
    let mut kb4 = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    for k in (0..q).rev() {
        let uk = u.interval(k);
        let gk_range = k * m..(k + 1) * m;
        for sub in (0..s).rev() {
            let node = k * s + sub;
            let x = traj.state(node);

            // Recompute the interior stage states from the stored node.
            problem.rhs_with_scratch(x, uk, xi, &mut w.f1, &mut w.k1);
            stage_state(&mut x2, x, &w.k1, 0.5 * h);
            problem.rhs_with_scratch(&x2, uk, xi, &mut w.f1, &mut w.k2);
            stage_state(&mut x3, x, &w.k2, 0.5 * h);
            problem.rhs_with_scratch(&x3, uk, xi, &mut w.f1, &mut w.k3);
            stage_state(&mut x4, x, &w.k3, h);

            // Reverse sweep through x⁺ = x + (h/6)(k1 + 2k2 + 2k3 + k4).
            for i in 0..n {
                kb1[i] = h / 6.0 * p[i];
                kb2[i] = h / 3.0 * p[i];
                kb3[i] = h / 3.0 * p[i];
                kb4[i] = h / 6.0 * p[i];
            }
            let gk = &mut grad[gk_range.clone()];

            problem.jacobian_vjp(&x4, uk, xi, &kb4, &mut tmp, &mut a);
            problem.input_vjp(&x4, xi, &kb4, &mut w.f1, gk);
            for i in 0..n {
                p[i] += a[i];
                kb3[i] += h * a[i];
            }

            problem.jacobian_vjp(&x3, uk, xi, &kb3, &mut tmp, &mut a);
            problem.input_vjp(&x3, xi, &kb3, &mut w.f1, gk);
            for i in 0..n {
                p[i] += a[i];
                kb2[i] += 0.5 * h * a[i];
            }

            problem.jacobian_vjp(&x2, uk, xi, &kb2, &mut tmp, &mut a);
            problem.input_vjp(&x2, xi, &kb2, &mut w.f1, gk);
            for i in 0..n {
                p[i] += a[i];
                kb1[i] += 0.5 * h * a[i];
            }

            problem.jacobian_vjp(x, uk, xi, &kb1, &mut tmp, &mut a);
            problem.input_vjp(x, xi, &kb1, &mut w.f1, gk);
            for i in 0..n {
                p[i] += a[i];
            }

            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::IntegrationDiverged { node });
            }
            costates[node * n..(node + 1) * n].copy_from_slice(&p);
        }
    }

    // Raw entries are ∂T/∂u_{kj}; divide by Δt to express the gradient in
    // the weighted inner product.
    let dt = grid.dt();
    for g in &mut grad {
        *g /= dt;
    }

    let gradient = Control::from_values(grid, grad)?;
    let adjoint = AdjointTrajectory { grid, substeps: s, state_dim: n, costates };
    Ok((gradient, adjoint))
}
