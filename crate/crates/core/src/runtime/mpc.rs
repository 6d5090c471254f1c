use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::{obstacle_constraint, solve_constrained, AlOptions, AlReport, AlState, CircleObstacle, ConstrainedProblem};
use crate::ddp::SolverOptions;
use crate::error::{Error, Result};
use crate::gpc::GpcVector;
use crate::runtime::{PlantSim, ScenarioConfig, Setup};

/// Solver side of a receding-horizon controller.
pub struct MpcContext {
    pub setup: Setup,
    pub solver: SolverOptions,
    pub al: AlOptions,
    pub dt: f64,
    /// Prediction horizon `H`.
    pub horizon: usize,
    /// Episode length `N`.
    pub steps: usize,
    pub initial_control: Vec<f64>,
}

impl MpcContext {
    pub fn gpc(cfg: &ScenarioConfig) -> Result<Self> {
        Ok(Self::with_setup(cfg, Setup::gpc(cfg)?))
    }

    /// Mean-parameter model; obstacles are enforced without inflation.
    pub fn deterministic(cfg: &ScenarioConfig) -> Result<Self> {
        Ok(Self::with_setup(cfg, Setup::deterministic(cfg)?))
    }

    pub fn with_setup(cfg: &ScenarioConfig, setup: Setup) -> Self {
        Self {
            setup,
            solver: cfg.mpc_solver_options(),
            al: cfg.al.clone(),
            dt: cfg.dt,
            horizon: cfg.prediction_horizon,
            steps: cfg.horizon,
            initial_control: cfg.initial_control.clone(),
        }
    }

    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            controls: vec![DVector::from_column_slice(&self.initial_control); self.horizon],
            al: None,
        }
    }

    fn position_dims(&self) -> &[usize] {
        &self.setup.sampler.spec().position_dims
    }
}

/// Controls and multipliers carried from one cycle to the next.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub controls: Vec<DVector<f64>>,
    pub al: Option<AlState>,
}

impl WarmStart {
    fn shift(&mut self, controls: Vec<DVector<f64>>, al: Option<AlState>) {
        let mut controls = controls;
        if let Some(last) = controls.last().cloned() {
            controls.remove(0);
            controls.push(last);
        }
        self.controls = controls;
        self.al = al.map(|a| a.shifted());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub max_violation: f64,
    /// The solve failed and the previous cycle's control was applied.
    pub fallback: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcEntry {
    pub step: usize,
    pub time: f64,
    pub measured: Vec<f64>,
    pub control: Vec<f64>,
    /// Plant state after applying `control`.
    pub state: Vec<f64>,
    /// Largest higher-order coefficient of the lifted measurement.
    pub lifted_higher_max: f64,
    pub predicted_mean: Vec<f64>,
    /// Row-major position covariance of the one-step prediction.
    pub predicted_covariance: Vec<Vec<f64>>,
    pub scaling: f64,
    pub constraint_values: Vec<f64>,
    pub stats: CycleStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcLog {
    pub params: Vec<f64>,
    pub initial_state: Vec<f64>,
    pub entries: Vec<MpcEntry>,
}

impl MpcLog {
    pub fn final_state(&self) -> &[f64] {
        self.entries.last().map_or(&self.initial_state, |e| &e.state)
    }

    /// Plant states `x_0, …, x_N`.
    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        std::iter::once(self.initial_state.as_slice()).chain(self.entries.iter().map(|e| e.state.as_slice()))
    }

    pub fn fallback_count(&self) -> usize {
        self.entries.iter().filter(|e| e.stats.fallback).count()
    }

    pub fn collided(&self, obstacles: &[CircleObstacle], dims: &[usize]) -> bool {
        self.states().any(|x| {
            let z: Vec<f64> = dims.iter().map(|&d| x[d]).collect();
            obstacles.iter().any(|o| o.contains(&z))
        })
    }

    /// Fraction of steps whose plant state lies in the confidence circle
    /// `‖z - z̄‖ ≤ √(s λmax)` predicted by the cycle that produced it.
    pub fn confidence_coverage(&self, dims: &[usize]) -> f64 {
        if self.entries.is_empty() {
            return 1.0;
        }
        let inside = self
            .entries
            .iter()
            .filter(|e| {
                let k = dims.len();
                let sigma = DMatrix::from_fn(k, k, |i, j| e.predicted_covariance[i][j]);
                let lmax = sigma.symmetric_eigenvalues().max().max(0.0);
                let dist2: f64 = dims.iter().map(|&d| (e.state[d] - e.predicted_mean[d]).powi(2)).sum();
                dist2 <= e.scaling * lmax
            })
            .count();
        inside as f64 / self.entries.len() as f64
    }
}

fn problem<'a>(ctx: &'a MpcContext, x0: GpcVector) -> ConstrainedProblem<'a> {
    ConstrainedProblem {
        model: &ctx.setup.model,
        dynamics: ctx.setup.dynamics.as_ref(),
        dt: ctx.dt,
        cost: &ctx.setup.cost,
        x0,
        limits: Some(&ctx.setup.limits),
        obstacles: &ctx.setup.obstacles,
        sampler: &ctx.setup.sampler,
    }
}

/// One receding-horizon cycle at step `k`: measure, solve, apply, shift.
pub fn mpc_step(ctx: &MpcContext, plant: &mut PlantSim, warm: &mut WarmStart, k: usize) -> Result<MpcEntry> {
    if k >= ctx.steps {
        return Err(Error::InvalidArgument(format!("step {k} is past the episode length {}", ctx.steps)));
    }
    let setup = &ctx.setup;
    let measured = plant.measure().to_vec();
    let x0 = setup.model.lift(&measured);
    let lifted_higher_max = (0..x0.state_dim())
        .flat_map(|i| x0.coeffs(i)[1..].iter().map(|c| c.abs()))
        .fold(0.0, f64::max);

    let dims = ctx.position_dims().to_vec();
    let (control, predicted, scaling, constraint_values, stats) =
        match solve_constrained(&problem(ctx, x0.clone()), &warm.controls, warm.al.clone(), &ctx.solver, &ctx.al) {
            Ok(sol) => {
                let stats = CycleStats {
                    outer_iterations: sol.report.outer_iterations,
                    inner_iterations: sol.report.inner_iterations,
                    converged: sol.report.converged,
                    max_violation: sol.report.max_violation,
                    fallback: false,
                    failure: sol.report.failure.clone(),
                };
                let g = sol.constraint_values.iter().map(|row| row[0]).collect();
                let u = sol.controls[0].clone();
                let out = (u, sol.states[1].clone(), sol.scaling[0], g, stats);
                warm.shift(sol.controls, Some(sol.al));
                out
            }
            Err(e) => {
                let mut u = warm.controls[0].clone();
                setup.limits.clamp(&mut u);
                let pred = setup.model.euler_step(setup.dynamics.as_ref(), &x0, u.as_slice(), ctx.dt)?;
                let s = setup.sampler.scaling_factor(&pred, setup.model.basis())?.value;
                let g = setup
                    .obstacles
                    .iter()
                    .map(|o| obstacle_constraint(&pred, setup.model.basis(), o, s, &dims).map(|c| c.value))
                    .collect::<Result<Vec<_>>>()?;
                let stats = CycleStats {
                    outer_iterations: 0,
                    inner_iterations: 0,
                    converged: false,
                    max_violation: g.iter().fold(0.0f64, |a, &v| a.max(v)),
                    fallback: true,
                    failure: Some(e.to_string()),
                };
                let prev = std::mem::take(&mut warm.controls);
                let al = warm.al.take();
                warm.shift(prev, al);
                (u, pred, s, g, stats)
            }
        };

    let cov = predicted.covariance_of(setup.model.basis(), &dims)?;
    let state = plant.step(control.as_slice())?.to_vec();
    Ok(MpcEntry {
        step: k,
        time: k as f64 * ctx.dt,
        measured,
        control: control.as_slice().to_vec(),
        state,
        lifted_higher_max,
        predicted_mean: predicted.mean().as_slice().to_vec(),
        predicted_covariance: cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
        scaling,
        constraint_values,
        stats,
    })
}

/// Runs a full episode of `N` receding-horizon cycles.
pub fn run_mpc(ctx: &MpcContext, plant: &mut PlantSim) -> Result<MpcLog> {
    let mut warm = ctx.warm_start();
    let mut log = MpcLog {
        params: plant.params().to_vec(),
        initial_state: plant.measure().to_vec(),
        entries: Vec::with_capacity(ctx.steps),
    };
    for k in 0..ctx.steps {
        log.entries.push(mpc_step(ctx, plant, &mut warm, k)?);
    }
    Ok(log)
}

/// Single full-horizon gPC solve with its predicted statistics.
#[derive(Debug, Clone)]
pub struct OpenLoopResult {
    pub states: Vec<GpcVector>,
    pub controls: Vec<DVector<f64>>,
    /// Expected tracking cost without penalties.
    pub cost: f64,
    /// Full state covariance at every step `0..=N`.
    pub covariances: Vec<DMatrix<f64>>,
    /// Position covariance trace at every step.
    pub position_traces: Vec<f64>,
    /// `s(p)` at every step `0..=N`.
    pub scaling: Vec<f64>,
    /// `[obstacle][step]` constraint values at steps `0..=N`.
    pub constraint_values: Vec<Vec<f64>>,
    pub report: AlReport,
}

impl OpenLoopResult {
    pub fn means(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|x| x.mean().as_slice().to_vec()).collect()
    }
}

pub fn run_open_loop(cfg: &ScenarioConfig) -> Result<OpenLoopResult> {
    open_loop_with(cfg, &Setup::gpc(cfg)?)
}

pub(crate) fn open_loop_with(cfg: &ScenarioConfig, setup: &Setup) -> Result<OpenLoopResult> {
    let x0 = setup.model.lift(&cfg.initial_state);
    let prob = ConstrainedProblem {
        model: &setup.model,
        dynamics: setup.dynamics.as_ref(),
        dt: cfg.dt,
        cost: &setup.cost,
        x0,
        limits: Some(&setup.limits),
        obstacles: &setup.obstacles,
        sampler: &setup.sampler,
    };
    let init = vec![DVector::from_column_slice(&cfg.initial_control); cfg.horizon];
    let sol = solve_constrained(&prob, &init, None, &cfg.solver, &cfg.al)?;

    let basis = setup.model.basis();
    let dims = &setup.sampler.spec().position_dims;
    let mut covariances = Vec::with_capacity(sol.states.len());
    let mut position_traces = Vec::with_capacity(sol.states.len());
    for x in &sol.states {
        let c = x.covariance(basis)?;
        position_traces.push(dims.iter().map(|&d| c[(d, d)]).sum());
        covariances.push(c);
    }
    let s0 = setup.sampler.scaling_factor(&sol.states[0], basis)?.value;
    let scaling: Vec<f64> = std::iter::once(s0).chain(sol.scaling.iter().copied()).collect();
    let constraint_values = setup
        .obstacles
        .iter()
        .zip(&sol.constraint_values)
        .map(|(o, row)| {
            let g0 = obstacle_constraint(&sol.states[0], basis, o, s0, dims)?.value;
            Ok(std::iter::once(g0).chain(row.iter().copied()).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OpenLoopResult {
        states: sol.states,
        controls: sol.controls,
        cost: sol.cost,
        covariances,
        position_traces,
        scaling,
        constraint_values,
        report: sol.report,
    })
}
