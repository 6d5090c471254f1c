//! Chance-constrained obstacle avoidance and the augmented-Lagrangian loop.
//!
//! A probabilistic obstacle constraint is replaced by a deterministic one on
//! the gPC coefficients: the confidence ellipsoid `{(z - z̄)ᵀ Σ⁻¹ (z - z̄) ≤ s}`
//! of the position is bounded by a ball of radius `√(s λmax(Σ))` around the
//! mean, and the ball must stay outside the inflated obstacle. The scaling
//! factor `s` is the Monte Carlo quantile of the Mahalanobis distance, since
//! the propagated position is generally not Gaussian.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::ddp::{self, BoxLimits, CostModel, GpcStepper, Problem, SolverOptions, StageDerivs, TrajectoryCost};
use crate::error::{Error, Result};
use crate::gpc::{sample_xi, GpcModel, GpcVector};
use crate::models::Dynamics;
use crate::orthopoly::BasisSet;

/// Circle (or sphere, for three position dimensions) to be avoided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleObstacle {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl CircleObstacle {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("obstacle radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    /// Whether a point lies strictly inside the obstacle.
    pub fn contains(&self, point: &[f64]) -> bool {
        let d2: f64 = self.center.iter().zip(point).map(|(c, p)| (p - c).powi(2)).sum();
        d2 < self.radius * self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChanceSpec {
    /// Required probability of constraint satisfaction.
    pub p: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Physical states that form the position.
    pub position_dims: Vec<usize>,
}

impl ChanceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidArgument(format!("probability level must be in (0, 1), got {}", self.p)));
        }
        if self.n_samples < 100 {
            return Err(Error::InvalidArgument(format!(
                "at least 100 samples are needed for the scaling factor, got {}",
                self.n_samples
            )));
        }
        if self.position_dims.is_empty() {
            return Err(Error::InvalidArgument("no position dimensions".into()));
        }
        Ok(())
    }

    /// Quantile of the chi-square distribution with one degree of freedom
    /// per position dimension: the exact `s` for Gaussian positions.
    pub fn gaussian_scaling(&self) -> f64 {
        ChiSquared::new(self.position_dims.len() as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(self.p)
    }
}

/// `s(p)` together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub value: f64,
    /// Covariance was zero; `value` is the Gaussian quantile.
    pub degenerate: bool,
    /// Covariance was ill-conditioned and regularized before inversion.
    pub regularized: bool,
}

/// Seeded samples of `ξ` with their basis values, reused for every
/// scaling-factor evaluation. Sample `i` is drawn from ChaCha stream `i`.
#[derive(Debug, Clone)]
pub struct ChanceSampler {
    spec: ChanceSpec,
    terms: usize,
    /// Row-major `n_samples × (K+1)`.
    phi: Vec<f64>,
    gaussian: f64,
}

impl ChanceSampler {
    pub fn new(basis: &BasisSet, spec: ChanceSpec) -> Result<Self> {
        spec.validate()?;
        let terms = basis.len();
        let mut phi = Vec::with_capacity(spec.n_samples * terms);
        let mut row = Vec::with_capacity(terms);
        for i in 0..spec.n_samples {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let xi = sample_xi(basis, &mut rng);
            basis.eval_all_into(&xi, &mut row);
            phi.extend_from_slice(&row);
        }
        let gaussian = spec.gaussian_scaling();
        Ok(Self {
            spec,
            terms,
            phi,
            gaussian,
        })
    }

    pub fn spec(&self) -> &ChanceSpec {
        &self.spec
    }

    /// Empirical `p`-quantile of `(z - z̄)ᵀ Σ⁻¹ (z - z̄)` over the samples.
    pub fn scaling_factor(&self, x: &GpcVector, basis: &BasisSet) -> Result<Scaling> {
        if x.terms() != self.terms {
            return Err(Error::DimensionMismatch {
                what: "basis terms",
                expected: self.terms,
                found: x.terms(),
            });
        }
        let dims = &self.spec.position_dims;
        let mut sigma = x.covariance_of(basis, dims)?;
        let trace = sigma.trace();
        if !(trace > 0.0) {
            return Ok(Scaling {
                value: self.gaussian,
                degenerate: true,
                regularized: false,
            });
        }
        let eig = SymmetricEigen::new(sigma.clone());
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let regularized = !(lo > 0.0) || hi / lo > 1e12;
        if regularized {
            for a in 0..dims.len() {
                sigma[(a, a)] += 1e-12 * trace;
            }
        }
        let chol = sigma.cholesky().ok_or(Error::NonFinite("position covariance"))?;

        // Deviations from the mean are driven by the higher coefficients only.
        let k = dims.len();
        let mut dist = Vec::with_capacity(self.spec.n_samples);
        let mut dev = DVector::zeros(k);
        for row in self.phi.chunks_exact(self.terms) {
            for (a, &d) in dims.iter().enumerate() {
                let c = x.coeffs(d);
                dev[a] = c[1..].iter().zip(&row[1..]).map(|(c, p)| c * p).sum();
            }
            let solved = chol.solve(&dev);
            dist.push(dev.dot(&solved));
        }
        Ok(Scaling {
            value: empirical_quantile(&mut dist, self.spec.p),
            degenerate: false,
            regularized,
        })
    }
}

/// Smallest sample value with at least a fraction `p` of samples at or below it.
pub fn empirical_quantile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let idx = ((p * values.len() as f64).ceil() as usize).clamp(1, values.len()) - 1;
    values[idx]
}

/// Convenience wrapper that draws a fresh sample set.
pub fn scaling_factor(x: &GpcVector, basis: &BasisSet, spec: &ChanceSpec) -> Result<Scaling> {
    ChanceSampler::new(basis, spec.clone())?.scaling_factor(x, basis)
}

/// Position covariance block of `x`.
pub fn position_covariance(x: &GpcVector, basis: &BasisSet, dims: &[usize]) -> Result<DMatrix<f64>> {
    x.covariance_of(basis, dims)
}

/// Largest eigenvalue and its derivative with respect to the matrix entries.
#[derive(Debug, Clone)]
pub struct LambdaMax {
    pub value: f64,
    pub grad: DMatrix<f64>,
    /// The top two eigenvalues were within the gap threshold and the
    /// smoothed surrogate was used.
    pub smoothed: bool,
}

const GAP_SCALE: f64 = 1e-8;

pub fn lambda_max_with_grad(sigma: &DMatrix<f64>) -> LambdaMax {
    let k = sigma.nrows();
    if k == 1 {
        return LambdaMax {
            value: sigma[(0, 0)],
            grad: DMatrix::from_element(1, 1, 1.0),
            smoothed: false,
        };
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (i1, i2) = (order[0], order[1]);
    let (l1, l2) = (eig.eigenvalues[i1], eig.eigenvalues[i2]);
    let v1 = eig.eigenvectors.column(i1);
    let p1 = &v1 * v1.transpose();

    let eps = GAP_SCALE * sigma.trace();
    let gap = l1 - l2;
    if gap > eps {
        return LambdaMax {
            value: l1,
            grad: p1,
            smoothed: false,
        };
    }
    let v2 = eig.eigenvectors.column(i2);
    let p2 = &v2 * v2.transpose();
    let root = (gap * gap + eps * eps).sqrt();
    let value = 0.5 * (l1 + l2) + 0.5 * root;
    let mut grad = (&p1 + &p2) * 0.5;
    if root > 0.0 {
        grad += (&p1 - &p2) * (0.5 * gap / root);
        let deps = 0.5 * eps / root * GAP_SCALE;
        for a in 0..k {
            grad[(a, a)] += deps;
        }
    }
    LambdaMax {
        value,
        grad,
        smoothed: true,
    }
}

/// Value and gradient of one obstacle constraint `G ≤ 0`.
#[derive(Debug, Clone)]
pub struct ConstraintEval {
    pub value: f64,
    /// Gradient with respect to the flattened gPC coefficients.
    pub grad: DVector<f64>,
    pub smoothed: bool,
}

// Below this radius the confidence ball is treated as a point.
const ZERO_SPREAD: f64 = 1e-12;

/// `G = (r_c + √(s λmax))² - ‖z̄ - c‖²` with its gradient.
pub fn obstacle_constraint(
    x: &GpcVector,
    basis: &BasisSet,
    obstacle: &CircleObstacle,
    scaling: f64,
    dims: &[usize],
) -> Result<ConstraintEval> {
    if scaling < 0.0 {
        return Err(Error::InvalidArgument(format!("negative scaling factor {scaling}")));
    }
    if obstacle.center.len() != dims.len() {
        return Err(Error::DimensionMismatch {
            what: "obstacle center",
            expected: dims.len(),
            found: obstacle.center.len(),
        });
    }
    let t = x.terms();
    let sigma = x.covariance_of(basis, dims)?;
    let lm = lambda_max_with_grad(&sigma);
    let radius = (scaling * lm.value.max(0.0)).sqrt();
    let inflated = obstacle.radius + radius;

    let mut grad = DVector::zeros(x.data().len());
    let mut dist2 = 0.0;
    for (a, &d) in dims.iter().enumerate() {
        let diff = x.get(d, 0) - obstacle.center[a];
        dist2 += diff * diff;
        grad[d * t] = -2.0 * diff;
    }
    if radius > ZERO_SPREAD {
        // ∂G/∂λ = (r_c + ρ) s / ρ and ∂λ/∂x_aj = 2 (∂λ/∂Σ · x_·j)_a γ_j.
        let dg_dlambda = inflated * scaling / radius;
        let gamma = basis.norms();
        for j in 1..t {
            for (a, &da) in dims.iter().enumerate() {
                let mut s = 0.0;
                for (b, &db) in dims.iter().enumerate() {
                    s += lm.grad[(a, b)] * x.get(db, j);
                }
                grad[da * t + j] += dg_dlambda * 2.0 * s * gamma[j];
            }
        }
    }
    Ok(ConstraintEval {
        value: inflated * inflated - dist2,
        grad,
        smoothed: lm.smoothed,
    })
}

/// Powell–Hestenes–Rockafellar penalty for `G ≤ 0`:
/// `P = (max(0, λ + μG)² - λ²) / (2μ)` with its first two derivatives in `G`.
pub fn al_penalty(lambda: f64, mu: f64, g: f64) -> (f64, f64, f64) {
    let shifted = lambda + mu * g;
    if shifted > 0.0 {
        ((shifted * shifted - lambda * lambda) / (2.0 * mu), shifted, mu)
    } else {
        (-lambda * lambda / (2.0 * mu), 0.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlOptions {
    pub max_outer: usize,
    /// Constraint violation tolerance.
    pub tol: f64,
    /// Penalty growth factor.
    pub beta: f64,
    /// Required shrink factor of the violation between outer iterations.
    pub gamma_improve: f64,
    pub mu_init: f64,
    pub mu_max: f64,
}

impl Default for AlOptions {
    fn default() -> Self {
        Self {
            max_outer: 20,
            tol: 1e-4,
            beta: 10.0,
            gamma_improve: 0.25,
            mu_init: 10.0,
            mu_max: 1e10,
        }
    }
}

/// Multipliers and penalties, indexed `[constraint][step]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlState {
    pub lambdas: Vec<Vec<f64>>,
    pub penalties: Vec<Vec<f64>>,
    pub outer_iter: usize,
    /// Per-constraint maximum violation after the last update.
    pub last_violation: Vec<f64>,
    pub penalty_capped: bool,
}

impl AlState {
    pub fn new(constraints: usize, steps: usize, mu_init: f64) -> Self {
        Self {
            lambdas: vec![vec![0.0; steps]; constraints],
            penalties: vec![vec![mu_init; steps]; constraints],
            outer_iter: 0,
            last_violation: vec![f64::INFINITY; constraints],
            penalty_capped: false,
        }
    }

    pub fn constraints(&self) -> usize {
        self.lambdas.len()
    }

    pub fn steps(&self) -> usize {
        self.lambdas.first().map_or(0, Vec::len)
    }

    /// Drops the first step and repeats the last, keeping the violation history.
    pub fn shifted(&self) -> Self {
        let shift = |rows: &Vec<Vec<f64>>| {
            rows.iter()
                .map(|r| {
                    let mut out: Vec<f64> = r.iter().skip(1).copied().collect();
                    if let Some(&last) = r.last() {
                        out.push(last);
                    }
                    out
                })
                .collect()
        };
        Self {
            lambdas: shift(&self.lambdas),
            penalties: shift(&self.penalties),
            outer_iter: 0,
            last_violation: vec![f64::INFINITY; self.constraints()],
            penalty_capped: false,
        }
    }
}

/// Multiplier step `λ ← max(0, λ + μG)` and penalty growth for constraints
/// whose violation did not shrink enough.
pub fn al_update(state: &AlState, g: &[Vec<f64>], opts: &AlOptions) -> AlState {
    let mut next = state.clone();
    next.outer_iter += 1;
    for (i, row) in g.iter().enumerate() {
        let violation = row.iter().fold(0.0f64, |acc, &v| acc.max(v));
        let stagnant = violation > opts.tol && violation > opts.gamma_improve * state.last_violation[i];
        for (k, &gk) in row.iter().enumerate() {
            let mu = state.penalties[i][k];
            next.lambdas[i][k] = (state.lambdas[i][k] + mu * gk).max(0.0);
            if stagnant {
                let grown = mu * opts.beta;
                if grown > opts.mu_max {
                    next.penalty_capped = true;
                    next.penalties[i][k] = opts.mu_max;
                } else {
                    next.penalties[i][k] = grown;
                }
            }
        }
        next.last_violation[i] = violation;
    }
    next
}

/// Expected tracking cost plus penalties for every obstacle at every
/// post-control state `X_1, …, X_N`.
pub struct AugmentedCost<'a> {
    pub base: &'a CostModel,
    pub basis: &'a BasisSet,
    pub obstacles: &'a [CircleObstacle],
    pub dims: &'a [usize],
    /// Scaling factor for state `k + 1`.
    pub scaling: &'a [f64],
    pub al: &'a AlState,
    pub n: usize,
}

impl AugmentedCost<'_> {
    fn wrap(&self, x: &DVector<f64>) -> GpcVector {
        GpcVector::from_data(self.n, self.basis.len(), x.clone()).expect("consistent coefficient layout")
    }

    /// Constraint column for state index `step` (1-based).
    fn penalty(&self, step: usize, x: &DVector<f64>) -> f64 {
        if step == 0 || self.obstacles.is_empty() {
            return 0.0;
        }
        let gx = self.wrap(x);
        let col = step - 1;
        self.obstacles
            .iter()
            .enumerate()
            .map(|(i, obs)| {
                let g = obstacle_constraint(&gx, self.basis, obs, self.scaling[col], self.dims)
                    .map(|c| c.value)
                    .unwrap_or(f64::NAN);
                al_penalty(self.al.lambdas[i][col], self.al.penalties[i][col], g).0
            })
            .sum()
    }

    fn add_penalty_derivs(&self, step: usize, x: &DVector<f64>, lx: &mut DVector<f64>, lxx: &mut DMatrix<f64>) {
        if step == 0 || self.obstacles.is_empty() {
            return;
        }
        let gx = self.wrap(x);
        let col = step - 1;
        for (i, obs) in self.obstacles.iter().enumerate() {
            let Ok(c) = obstacle_constraint(&gx, self.basis, obs, self.scaling[col], self.dims) else {
                continue;
            };
            let (_, dp, d2p) = al_penalty(self.al.lambdas[i][col], self.al.penalties[i][col], c.value);
            if dp == 0.0 && d2p == 0.0 {
                continue;
            }
            lx.axpy(dp, &c.grad, 1.0);
            lxx.ger(d2p, &c.grad, &c.grad, 1.0);
        }
    }

    pub fn steps(&self) -> usize {
        self.scaling.len()
    }
}

impl TrajectoryCost for AugmentedCost<'_> {
    fn running(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.base.expected_running(k, x, u) + self.penalty(k, x)
    }

    fn running_derivs(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> StageDerivs {
        let mut d = self.base.running_derivs(k, x, u);
        self.add_penalty_derivs(k, x, &mut d.lx, &mut d.lxx);
        d
    }

    fn terminal(&self, x: &DVector<f64>) -> f64 {
        self.base.terminal(x) + self.penalty(self.steps(), x)
    }

    fn terminal_derivs(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (mut lx, mut lxx) = self.base.terminal_derivs(x);
        self.add_penalty_derivs(self.steps(), x, &mut lx, &mut lxx);
        (lx, lxx)
    }
}

/// Everything needed to solve one chance-constrained horizon.
pub struct ConstrainedProblem<'a> {
    pub model: &'a GpcModel,
    pub dynamics: &'a dyn Dynamics,
    pub dt: f64,
    pub cost: &'a CostModel,
    pub x0: GpcVector,
    pub limits: Option<&'a BoxLimits>,
    pub obstacles: &'a [CircleObstacle],
    pub sampler: &'a ChanceSampler,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlReport {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub max_violation: f64,
    /// Maximum violation after each outer iteration.
    pub violation_history: Vec<f64>,
    pub smoothed_eigenvalues: bool,
    pub regularized_covariance: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ConstrainedSolution {
    pub states: Vec<GpcVector>,
    pub controls: Vec<DVector<f64>>,
    /// Expected tracking cost without penalties.
    pub cost: f64,
    /// `s(p)` for states `X_1, …, X_N` as used in the final inner solve.
    pub scaling: Vec<f64>,
    /// `[obstacle][step]` constraint values at `X_1, …, X_N`.
    pub constraint_values: Vec<Vec<f64>>,
    pub al: AlState,
    pub report: AlReport,
}

impl ConstrainedProblem<'_> {
    fn scaling_along(&self, states: &[DVector<f64>], flags: &mut (bool, bool)) -> Result<Vec<f64>> {
        states[1..]
            .iter()
            .map(|x| {
                let gx = GpcVector::from_data(self.model.state_dim(), self.model.terms(), x.clone())?;
                let s = self.sampler.scaling_factor(&gx, self.model.basis())?;
                flags.1 |= s.regularized;
                Ok(s.value)
            })
            .collect()
    }

    fn constraint_values(&self, states: &[DVector<f64>], scaling: &[f64], flags: &mut (bool, bool)) -> Result<Vec<Vec<f64>>> {
        let dims = &self.sampler.spec().position_dims;
        self.obstacles
            .iter()
            .map(|obs| {
                states[1..]
                    .iter()
                    .zip(scaling)
                    .map(|(x, &s)| {
                        let gx = GpcVector::from_data(self.model.state_dim(), self.model.terms(), x.clone())?;
                        let c = obstacle_constraint(&gx, self.model.basis(), obs, s, dims)?;
                        flags.0 |= c.smoothed;
                        Ok(c.value)
                    })
                    .collect()
            })
            .collect()
    }
}

fn max_violation(g: &[Vec<f64>]) -> f64 {
    g.iter().flatten().fold(0.0f64, |acc, &v| acc.max(v))
}

/// Augmented-Lagrangian outer loop around control-limited iLQR.
pub fn solve_constrained(
    problem: &ConstrainedProblem<'_>,
    init_controls: &[DVector<f64>],
    warm: Option<AlState>,
    solver: &SolverOptions,
    opts: &AlOptions,
) -> Result<ConstrainedSolution> {
    let steps = init_controls.len();
    let stepper = GpcStepper::new(problem.model, problem.dynamics, problem.dt);
    let dims = &problem.sampler.spec().position_dims;
    for obs in problem.obstacles {
        if obs.center.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                what: "obstacle center",
                expected: dims.len(),
                found: obs.center.len(),
            });
        }
    }
    let mut al = match warm {
        Some(w) if w.constraints() == problem.obstacles.len() && w.steps() == steps => w,
        _ => AlState::new(problem.obstacles.len(), steps, opts.mu_init),
    };

    let base_problem = Problem {
        dynamics: &stepper,
        cost: problem.cost,
        x0: problem.x0.data().clone(),
        limits: problem.limits,
    };
    let mut controls = init_controls.to_vec();
    let mut states = ddp::rollout(&base_problem, &controls)?.states;
    let mut flags = (false, false);
    let mut history = Vec::new();
    let mut inner_iterations = 0;
    let mut converged = false;
    let mut failure = None;
    let mut scaling = vec![problem.sampler.spec().gaussian_scaling(); steps];
    let mut g = vec![vec![]; problem.obstacles.len()];

    for outer in 0..opts.max_outer.max(1) {
        scaling = problem.scaling_along(&states, &mut flags)?;
        let cost = AugmentedCost {
            base: problem.cost,
            basis: problem.model.basis(),
            obstacles: problem.obstacles,
            dims,
            scaling: &scaling,
            al: &al,
            n: problem.model.state_dim(),
        };
        let inner = Problem {
            dynamics: &stepper,
            cost: &cost,
            x0: problem.x0.data().clone(),
            limits: problem.limits,
        };
        let sol = ddp::solve(&inner, &controls, solver)?;
        inner_iterations += sol.report.iterations;
        states = sol.states;
        controls = sol.controls;

        g = problem.constraint_values(&states, &scaling, &mut flags)?;
        let viol = max_violation(&g);
        history.push(viol);
        if viol < opts.tol && (sol.report.converged || problem.obstacles.is_empty()) {
            converged = sol.report.converged;
            if !converged {
                failure = sol.report.failure.clone();
            }
            break;
        }
        if problem.obstacles.is_empty() {
            failure = sol.report.failure.clone();
            break;
        }
        al = al_update(&al, &g, opts);
        if al.penalty_capped {
            failure = Some("penalty parameter reached its cap".into());
            break;
        }
        if outer + 1 == opts.max_outer.max(1) {
            failure = Some(format!("outer iteration cap reached with violation {viol:e}"));
        }
    }

    let base_cost = ddp::rollout(&base_problem, &controls)?.cost;
    let n = problem.model.state_dim();
    let t = problem.model.terms();
    let states = states
        .into_iter()
        .map(|x| GpcVector::from_data(n, t, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstrainedSolution {
        states,
        controls,
        cost: base_cost,
        scaling,
        report: AlReport {
            outer_iterations: history.len(),
            inner_iterations,
            converged,
            max_violation: max_violation(&g),
            violation_history: history,
            smoothed_eigenvalues: flags.0,
            regularized_covariance: flags.1,
            failure,
        },
        constraint_values: g,
        al,
    })
}
