//! Control-limited iLQR.
//!
//! The backward pass expands the cost to second order and the dynamics to
//! first order around the nominal trajectory. With control limits the
//! feedforward term comes from a box-constrained QP ([`boxqp`]) and feedback
//! is restricted to the free control dimensions.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpc::{GpcModel, GpcVector};
use crate::models::Dynamics;
use crate::orthopoly::BasisSet;

/// Discrete-time transition `x_{k+1} = F(x_k, u_k)` and its Jacobians.
pub trait DiscreteDynamics {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;
    fn linearize(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
}

/// Euler-discretized Galerkin dynamics of the gPC coefficients.
pub struct GpcStepper<'a, D: Dynamics + ?Sized> {
    pub model: &'a GpcModel,
    pub dynamics: &'a D,
    pub dt: f64,
}

impl<'a, D: Dynamics + ?Sized> GpcStepper<'a, D> {
    pub fn new(model: &'a GpcModel, dynamics: &'a D, dt: f64) -> Self {
        Self { model, dynamics, dt }
    }

    fn wrap(&self, x: &DVector<f64>) -> Result<GpcVector> {
        GpcVector::from_data(self.model.state_dim(), self.model.terms(), x.clone())
    }
}

impl<D: Dynamics + ?Sized> DiscreteDynamics for GpcStepper<'_, D> {
    fn state_dim(&self) -> usize {
        self.model.coeff_dim()
    }

    fn control_dim(&self) -> usize {
        self.model.control_dim()
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let next = self.model.euler_step(self.dynamics, &self.wrap(x)?, u.as_slice(), self.dt)?;
        Ok(next.into_data())
    }

    fn linearize(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (mut a, mut b) = self.model.jacobian(self.dynamics, &self.wrap(x)?, u.as_slice())?;
        a *= self.dt;
        for i in 0..a.nrows() {
            a[(i, i)] += 1.0;
        }
        b *= self.dt;
        Ok((a, b))
    }
}

/// Time-invariant `x_{k+1} = A x_k + B u_k`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl DiscreteDynamics for LinearSystem {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.a * x + &self.b * u)
    }

    fn linearize(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((self.a.clone(), self.b.clone()))
    }
}

/// Second-order expansion of a stage cost.
#[derive(Debug, Clone)]
pub struct StageDerivs {
    pub lx: DVector<f64>,
    pub lu: DVector<f64>,
    pub lxx: DMatrix<f64>,
    pub luu: DMatrix<f64>,
    pub lux: DMatrix<f64>,
}

/// Running cost `l(k, x, u)` for `k < N` and terminal cost `φ(x_N)`.
pub trait TrajectoryCost {
    fn running(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64;
    fn running_derivs(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> StageDerivs;
    fn terminal(&self, x: &DVector<f64>) -> f64;
    fn terminal_derivs(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>);
}

/// Quadratic tracking cost `½ (X - X_d)ᵀ A_X (X - X_d) + ½ uᵀ R u`, with the
/// terminal weight `Af_X`.
#[derive(Debug, Clone)]
pub struct CostModel {
    pub state_weight: DMatrix<f64>,
    pub control_weight: DMatrix<f64>,
    pub terminal_weight: DMatrix<f64>,
    /// Desired coefficients per step; a single entry is used for every step.
    pub targets: Vec<DVector<f64>>,
}

impl CostModel {
    /// Expected cost for a physical weight `A`: `A_X = A ⊗ diag(γ_0, …, γ_K)`.
    pub fn kronecker(
        basis: &BasisSet,
        state: &DMatrix<f64>,
        control: DMatrix<f64>,
        terminal: &DMatrix<f64>,
        target: &GpcVector,
    ) -> Self {
        let g = DMatrix::from_diagonal(&DVector::from_column_slice(basis.norms()));
        Self {
            state_weight: state.kronecker(&g),
            control_weight: control,
            terminal_weight: terminal.kronecker(&g),
            targets: vec![target.data().clone()],
        }
    }

    /// Block-diagonal weight `A_i = diag(a_i0, a_i1 γ_1, …, a_iK γ_K)` per state.
    /// `moment_weights[i]` holds `a_i0, …, a_iK`.
    pub fn moment_weighted(basis: &BasisSet, moment_weights: &[Vec<f64>]) -> DMatrix<f64> {
        let t = basis.len();
        let gamma = basis.norms();
        let diag = DVector::from_iterator(
            moment_weights.len() * t,
            moment_weights.iter().flat_map(|row| (0..t).map(move |j| row[j] * gamma[j])),
        );
        DMatrix::from_diagonal(&diag)
    }

    pub fn target(&self, k: usize) -> &DVector<f64> {
        &self.targets[k.min(self.targets.len() - 1)]
    }

    pub fn expected_running(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let e = x - self.target(k);
        0.5 * e.dot(&(&self.state_weight * &e)) + 0.5 * u.dot(&(&self.control_weight * u))
    }

    pub fn expected_terminal(&self, x: &DVector<f64>, k: usize) -> f64 {
        let e = x - self.target(k);
        0.5 * e.dot(&(&self.terminal_weight * &e))
    }
}

impl TrajectoryCost for CostModel {
    fn running(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.expected_running(k, x, u)
    }

    fn running_derivs(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> StageDerivs {
        let e = x - self.target(k);
        StageDerivs {
            lx: &self.state_weight * e,
            lu: &self.control_weight * u,
            lxx: self.state_weight.clone(),
            luu: self.control_weight.clone(),
            lux: DMatrix::zeros(u.len(), x.len()),
        }
    }

    fn terminal(&self, x: &DVector<f64>) -> f64 {
        self.expected_terminal(x, usize::MAX)
    }

    fn terminal_derivs(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let e = x - self.target(usize::MAX);
        (&self.terminal_weight * e, self.terminal_weight.clone())
    }
}

/// Elementwise control bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxLimits {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxLimits {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "control limits",
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("lower control limit exceeds upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn symmetric(bound: f64, m: usize) -> Self {
        Self {
            lower: vec![-bound; m],
            upper: vec![bound; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn clamp(&self, u: &mut DVector<f64>) {
        for i in 0..u.len() {
            u[i] = u[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }
}

/// Result of [`boxqp`].
#[derive(Debug, Clone)]
pub struct BoxQpSolution {
    pub x: DVector<f64>,
    pub free: Vec<bool>,
    pub iterations: usize,
}

const BOXQP_MAX_ITERS: usize = 100;

/// Minimizes `½ xᵀ H x + qᵀ x` subject to `lower ≤ x ≤ upper` by projected Newton.
pub fn boxqp(
    h: &DMatrix<f64>,
    q: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    init: &DVector<f64>,
) -> Result<BoxQpSolution> {
    let m = q.len();
    let value = |x: &DVector<f64>| 0.5 * x.dot(&(h * x)) + q.dot(x);
    let mut x = DVector::from_fn(m, |i, _| init[i].clamp(lower[i], upper[i]));
    let mut f = value(&x);
    let mut grad_norm = f64::INFINITY;
    let tol = 1e-12 * (1.0 + q.amax());

    for iter in 0..BOXQP_MAX_ITERS {
        let grad = q + h * &x;
        let clamped: Vec<bool> = (0..m)
            .map(|i| (x[i] <= lower[i] && grad[i] > 0.0) || (x[i] >= upper[i] && grad[i] < 0.0))
            .collect();
        let free: Vec<bool> = clamped.iter().map(|c| !c).collect();
        let nfree = free.iter().filter(|f| **f).count();
        grad_norm = (0..m).filter(|&i| free[i]).map(|i| grad[i] * grad[i]).sum::<f64>().sqrt();
        if nfree == 0 || grad_norm <= tol {
            return Ok(BoxQpSolution { x, free, iterations: iter });
        }

        let idx: Vec<usize> = (0..m).filter(|&i| free[i]).collect();
        let hff = DMatrix::from_fn(nfree, nfree, |a, b| h[(idx[a], idx[b])]);
        let chol = Cholesky::new(hff).ok_or(Error::InvalidArgument("box QP Hessian not positive definite".into()))?;
        let gf = DVector::from_fn(nfree, |a, _| grad[idx[a]]);
        let step_f = chol.solve(&(-gf));
        let mut dir = DVector::zeros(m);
        for (a, &i) in idx.iter().enumerate() {
            dir[i] = step_f[a];
        }
        let slope = dir.dot(&grad);
        if slope >= 0.0 {
            return Ok(BoxQpSolution { x, free, iterations: iter });
        }

        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-22 {
            let cand = DVector::from_fn(m, |i, _| (x[i] + step * dir[i]).clamp(lower[i], upper[i]));
            let fc = value(&cand);
            if (fc - f) / (step * slope) >= 0.1 {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.6;
        }
        match accepted {
            Some((cand, fc)) => {
                let progress = f - fc;
                x = cand;
                f = fc;
                if progress <= 1e-14 * (1.0 + f.abs()) && iter > 0 {
                    let grad = q + h * &x;
                    let free = (0..m)
                        .map(|i| !((x[i] <= lower[i] && grad[i] > 0.0) || (x[i] >= upper[i] && grad[i] < 0.0)))
                        .collect();
                    return Ok(BoxQpSolution { x, free, iterations: iter + 1 });
                }
            }
            None => return Ok(BoxQpSolution { x, free, iterations: iter }),
        }
    }
    Err(Error::BoxQpIterationCap { grad_norm })
}

/// Locally optimal affine control law `δu = k + K δx` per step.
#[derive(Debug, Clone)]
pub struct Policy {
    pub feedforward: Vec<DVector<f64>>,
    pub feedback: Vec<DMatrix<f64>>,
    /// Linear and quadratic coefficients of the predicted cost change,
    /// `ΔJ(α) = α d1 + α² d2`.
    pub expected: [f64; 2],
}

impl Policy {
    pub fn horizon(&self) -> usize {
        self.feedforward.len()
    }

    pub fn expected_improvement(&self, alpha: f64) -> f64 {
        -(alpha * self.expected[0] + alpha * alpha * self.expected[1])
    }

    /// Mean over steps of `max_i |k_i| / (|ū_i| + 1)`.
    pub fn gradient_norm(&self, controls: &[DVector<f64>]) -> f64 {
        if self.feedforward.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .feedforward
            .iter()
            .zip(controls)
            .map(|(k, u)| k.iter().zip(u.iter()).map(|(a, b)| a.abs() / (b.abs() + 1.0)).fold(0.0, f64::max))
            .sum();
        total / self.feedforward.len() as f64
    }
}

/// Dynamics, cost, initial state and optional control limits.
pub struct Problem<'a> {
    pub dynamics: &'a dyn DiscreteDynamics,
    pub cost: &'a dyn TrajectoryCost,
    pub x0: DVector<f64>,
    pub limits: Option<&'a BoxLimits>,
}

/// A state/control trajectory and its total cost.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub cost: f64,
}

/// Simulates `controls` (clamped to the limits) from `x0`.
pub fn rollout(problem: &Problem<'_>, controls: &[DVector<f64>]) -> Result<Rollout> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    let mut applied = Vec::with_capacity(controls.len());
    let mut x = problem.x0.clone();
    let mut cost = 0.0;
    for (k, u) in controls.iter().enumerate() {
        let mut u = u.clone();
        if let Some(lim) = problem.limits {
            lim.clamp(&mut u);
        }
        cost += problem.cost.running(k, &x, &u);
        let next = problem.dynamics.step(&x, &u)?;
        states.push(std::mem::replace(&mut x, next));
        applied.push(u);
    }
    cost += problem.cost.terminal(&x);
    states.push(x);
    if !cost.is_finite() || states.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("rollout"));
    }
    Ok(Rollout {
        states,
        controls: applied,
        cost,
    })
}

/// Applies `u_k = ū_k + α k_k + K_k (x_k - x̄_k)` with clipping to the limits.
pub fn forward_pass(problem: &Problem<'_>, nominal: &Rollout, policy: &Policy, alpha: f64) -> Result<Rollout> {
    let n_steps = nominal.controls.len();
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut controls = Vec::with_capacity(n_steps);
    let mut x = problem.x0.clone();
    let mut cost = 0.0;
    for k in 0..n_steps {
        let dx = &x - &nominal.states[k];
        let mut u = &nominal.controls[k] + &policy.feedforward[k] * alpha + &policy.feedback[k] * dx;
        if let Some(lim) = problem.limits {
            lim.clamp(&mut u);
        }
        cost += problem.cost.running(k, &x, &u);
        let next = problem.dynamics.step(&x, &u)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forward pass state"));
        }
        states.push(std::mem::replace(&mut x, next));
        controls.push(u);
    }
    cost += problem.cost.terminal(&x);
    states.push(x);
    if !cost.is_finite() {
        return Err(Error::NonFinite("forward pass cost"));
    }
    Ok(Rollout { states, controls, cost })
}

/// Riccati-style sweep producing the control-limited policy.
pub fn backward_pass(
    problem: &Problem<'_>,
    nominal: &Rollout,
    jacobians: &[(DMatrix<f64>, DMatrix<f64>)],
    reg: f64,
) -> Result<Policy> {
    let n_steps = nominal.controls.len();
    let m = problem.dynamics.control_dim();
    let (mut vx, mut vxx) = problem.cost.terminal_derivs(&nominal.states[n_steps]);
    let mut feedforward = vec![DVector::zeros(m); n_steps];
    let mut feedback = vec![DMatrix::zeros(m, nominal.states[0].len()); n_steps];
    let mut expected = [0.0; 2];

    for k in (0..n_steps).rev() {
        let (a, b) = &jacobians[k];
        let x = &nominal.states[k];
        let u = &nominal.controls[k];
        let l = problem.cost.running_derivs(k, x, u);

        let at = a.transpose();
        let bt = b.transpose();
        let vxx_a = &vxx * a;
        let vxx_b = &vxx * b;
        let qx = &l.lx + &at * &vx;
        let qu = &l.lu + &bt * &vx;
        let qxx = &l.lxx + &at * &vxx_a;
        let quu = &l.luu + &bt * &vxx_b;
        let qux = &l.lux + &bt * &vxx_a;

        let mut quu_reg = quu.clone();
        for i in 0..m {
            quu_reg[(i, i)] += reg;
        }
        let quu_reg = symmetrize(quu_reg);

        let (kff, kfb) = match problem.limits {
            Some(lim) => {
                let lower = DVector::from_fn(m, |i, _| lim.lower[i] - u[i]);
                let upper = DVector::from_fn(m, |i, _| lim.upper[i] - u[i]);
                let init = if k + 1 < n_steps { feedforward[k + 1].clone() } else { DVector::zeros(m) };
                let sol = boxqp(&quu_reg, &qu, &lower, &upper, &init).map_err(|e| match e {
                    Error::InvalidArgument(_) => Error::NotPositiveDefinite { step: k },
                    other => other,
                })?;
                let idx: Vec<usize> = (0..m).filter(|&i| sol.free[i]).collect();
                let mut kfb = DMatrix::zeros(m, x.len());
                if !idx.is_empty() {
                    let hff = DMatrix::from_fn(idx.len(), idx.len(), |a, b| quu_reg[(idx[a], idx[b])]);
                    let chol = Cholesky::new(hff).ok_or(Error::NotPositiveDefinite { step: k })?;
                    let rows = DMatrix::from_fn(idx.len(), x.len(), |a, c| qux[(idx[a], c)]);
                    let gains = -chol.solve(&rows);
                    for (a, &i) in idx.iter().enumerate() {
                        kfb.set_row(i, &gains.row(a));
                    }
                }
                (sol.x, kfb)
            }
            None => {
                let chol = Cholesky::new(quu_reg).ok_or(Error::NotPositiveDefinite { step: k })?;
                (-chol.solve(&qu), -chol.solve(&qux))
            }
        };

        expected[0] += kff.dot(&qu);
        expected[1] += 0.5 * kff.dot(&(&quu * &kff));

        let kt = kfb.transpose();
        let quu_k = &quu * &kff;
        vx = qx + &kt * &quu_k + &kt * &qu + qux.tr_mul(&kff);
        let cross = &kt * &qux;
        vxx = symmetrize(qxx + &kt * &quu * &kfb + &cross + cross.transpose());

        feedforward[k] = kff;
        feedback[k] = kfb;
    }
    Ok(Policy {
        feedforward,
        feedback,
        expected,
    })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Absolute cost-change threshold.
    pub tol_cost: f64,
    /// Threshold on [`Policy::gradient_norm`].
    pub tol_grad: f64,
    pub reg_init: f64,
    /// Smallest nonzero regularization; smaller values snap to zero.
    pub reg_min: f64,
    pub reg_max: f64,
    pub reg_increase: f64,
    pub reg_decrease: f64,
    /// Line search tries `α = 2^0, 2^-1, …, 2^-(steps-1)`.
    pub line_search_steps: usize,
    pub armijo: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol_cost: 1e-6,
            tol_grad: 1e-6,
            reg_init: 0.0,
            reg_min: 1e-6,
            reg_max: 1e8,
            reg_increase: 10.0,
            reg_decrease: 0.5,
            line_search_steps: 11,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    CostChange,
    Gradient,
    MaxIterations,
    /// No step could be accepted even at maximum regularization.
    Stalled,
    EmptyHorizon,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Cost of the initial rollout followed by every accepted iterate.
    pub cost_history: Vec<f64>,
    pub final_reg: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub cost: f64,
    pub policy: Policy,
    pub report: ConvergenceReport,
}

/// Iterates backward and forward passes from `init_controls` until convergence.
pub fn solve(problem: &Problem<'_>, init_controls: &[DVector<f64>], opts: &SolverOptions) -> Result<Solution> {
    let m = problem.dynamics.control_dim();
    if problem.x0.len() != problem.dynamics.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: problem.dynamics.state_dim(),
            found: problem.x0.len(),
        });
    }
    if let Some(bad) = init_controls.iter().find(|u| u.len() != m) {
        return Err(Error::DimensionMismatch {
            what: "initial control",
            expected: m,
            found: bad.len(),
        });
    }
    if let Some(lim) = problem.limits {
        if lim.dim() != m {
            return Err(Error::DimensionMismatch {
                what: "control limits",
                expected: m,
                found: lim.dim(),
            });
        }
    }

    let mut nominal = rollout(problem, init_controls)?;
    let mut history = vec![nominal.cost];
    let empty_policy = |n: usize| Policy {
        feedforward: vec![DVector::zeros(m); n],
        feedback: vec![DMatrix::zeros(m, problem.x0.len()); n],
        expected: [0.0; 2],
    };

    if init_controls.is_empty() {
        return Ok(Solution {
            cost: nominal.cost,
            states: nominal.states,
            controls: nominal.controls,
            policy: empty_policy(0),
            report: ConvergenceReport {
                iterations: 0,
                converged: true,
                termination: Termination::EmptyHorizon,
                cost_history: history,
                final_reg: opts.reg_init,
                failure: None,
            },
        });
    }

    let mut reg = opts.reg_init;
    let mut policy = empty_policy(init_controls.len());
    let mut termination = Termination::MaxIterations;
    let mut failure = None;
    let mut iterations = 0;

    let bump = |reg: f64| (reg * opts.reg_increase).max(opts.reg_min);
    let mut jacobians = linearize_all(problem, &nominal)?;

    'outer: while iterations < opts.max_iters {
        iterations += 1;

        // Backward pass, raising regularization until Q_uu is positive definite.
        policy = loop {
            match backward_pass(problem, &nominal, &jacobians, reg) {
                Ok(p) => break p,
                Err(Error::NotPositiveDefinite { step }) => {
                    reg = bump(reg);
                    if reg > opts.reg_max {
                        termination = Termination::Stalled;
                        failure = Some(format!("Q_uu not positive definite at step {step}"));
                        break 'outer;
                    }
                }
                Err(e) => return Err(e),
            }
        };

        if policy.gradient_norm(&nominal.controls) < opts.tol_grad && reg < 1e-5 {
            termination = Termination::Gradient;
            break;
        }

        let mut accepted = None;
        let mut alpha = 1.0;
        for _ in 0..opts.line_search_steps {
            if let Ok(cand) = forward_pass(problem, &nominal, &policy, alpha) {
                let actual = nominal.cost - cand.cost;
                let predicted = policy.expected_improvement(alpha);
                let ok = if predicted > 0.0 {
                    actual / predicted >= opts.armijo && actual >= 0.0
                } else {
                    actual > 0.0
                };
                if ok {
                    accepted = Some(cand);
                    break;
                }
            }
            alpha *= 0.5;
        }

        match accepted {
            Some(cand) => {
                let dcost = nominal.cost - cand.cost;
                nominal = cand;
                history.push(nominal.cost);
                reg *= opts.reg_decrease;
                if reg < opts.reg_min {
                    reg = 0.0;
                }
                if dcost.abs() < opts.tol_cost {
                    termination = Termination::CostChange;
                    break;
                }
                jacobians = linearize_all(problem, &nominal)?;
            }
            None => {
                reg = bump(reg);
                if reg > opts.reg_max {
                    termination = Termination::Stalled;
                    failure = Some("line search failed at maximum regularization".into());
                    break;
                }
            }
        }
    }

    let converged = matches!(termination, Termination::CostChange | Termination::Gradient);
    Ok(Solution {
        cost: nominal.cost,
        states: nominal.states,
        controls: nominal.controls,
        policy,
        report: ConvergenceReport {
            iterations,
            converged,
            termination,
            cost_history: history,
            final_reg: reg,
            failure,
        },
    })
}

fn linearize_all(problem: &Problem<'_>, nominal: &Rollout) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
    nominal
        .controls
        .iter()
        .zip(&nominal.states)
        .map(|(u, x)| problem.dynamics.linearize(x, u))
        .collect()
}
