//! CSV and JSON writers. Every column layout starts with `step,time`; floats
//! use Rust's shortest round-trip formatting so that output is reproducible.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gpc::sample_xi;
use crate::orthopoly::BasisSet;
use crate::runtime::{MpcLog, OpenLoopResult, ScenarioConfig};

fn row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let cells: Vec<String> = cells.into_iter().collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

fn fmt_all<'a>(values: impl IntoIterator<Item = &'a f64> + 'a) -> impl Iterator<Item = String> + 'a {
    values.into_iter().map(|v| v.to_string())
}

fn named(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

/// `step,time,x0..,u0..`; the final row has empty control cells.
pub fn trajectory_csv(result: &OpenLoopResult, dt: f64) -> String {
    let means = result.means();
    let n = means.first().map_or(0, Vec::len);
    let m = result.controls.first().map_or(0, |u| u.len());
    let mut out = String::new();
    row(&mut out, ["step".into(), "time".into()].into_iter().chain(named("x", n)).chain(named("u", m)));
    for (k, x) in means.iter().enumerate() {
        let controls: Vec<String> = match result.controls.get(k) {
            Some(u) => fmt_all(u.iter()).collect(),
            None => vec![String::new(); m],
        };
        row(
            &mut out,
            [k.to_string(), (k as f64 * dt).to_string()].into_iter().chain(fmt_all(x)).chain(controls),
        );
    }
    out
}

/// `step,time,c_i_j` for the upper triangle `i ≤ j` of the state covariance.
pub fn covariance_csv(result: &OpenLoopResult, dt: f64) -> String {
    let n = result.covariances.first().map_or(0, |c| c.nrows());
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mut out = String::new();
    row(
        &mut out,
        ["step".into(), "time".into()].into_iter().chain(pairs.iter().map(|(i, j)| format!("c_{i}_{j}"))),
    );
    for (k, c) in result.covariances.iter().enumerate() {
        row(
            &mut out,
            [k.to_string(), (k as f64 * dt).to_string()]
                .into_iter()
                .chain(pairs.iter().map(|&(i, j)| c[(i, j)].to_string())),
        );
    }
    out
}

/// `step,time,s_p,g0..` with one constraint column per obstacle.
pub fn constraints_csv(result: &OpenLoopResult, dt: f64) -> String {
    let mut out = String::new();
    let n_obs = result.constraint_values.len();
    row(&mut out, ["step".into(), "time".into(), "s_p".into()].into_iter().chain(named("g", n_obs)));
    for (k, s) in result.scaling.iter().enumerate() {
        row(
            &mut out,
            [k.to_string(), (k as f64 * dt).to_string(), s.to_string()]
                .into_iter()
                .chain(result.constraint_values.iter().map(|g| g[k].to_string())),
        );
    }
    out
}

/// One row per receding-horizon cycle.
pub fn mpc_csv(log: &MpcLog) -> String {
    let n = log.initial_state.len();
    let m = log.entries.first().map_or(0, |e| e.control.len());
    let n_obs = log.entries.first().map_or(0, |e| e.constraint_values.len());
    let k = log.entries.first().map_or(0, |e| e.predicted_covariance.len());
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let mut out = String::new();
    row(
        &mut out,
        ["step".into(), "time".into()]
            .into_iter()
            .chain(named("x", n))
            .chain(named("u", m))
            .chain(named("pred", n))
            .chain(pairs.iter().map(|(i, j)| format!("c_{i}_{j}")))
            .chain(["s_p".into(), "radius".into()])
            .chain(named("g", n_obs))
            .chain(["inner_iterations".into(), "fallback".into()]),
    );
    for e in &log.entries {
        let sigma = DMatrix::from_fn(k, k, |i, j| e.predicted_covariance[i][j]);
        let lmax = if k > 0 { sigma.symmetric_eigenvalues().max().max(0.0) } else { 0.0 };
        row(
            &mut out,
            [e.step.to_string(), e.time.to_string()]
                .into_iter()
                .chain(fmt_all(&e.measured))
                .chain(fmt_all(&e.control))
                .chain(fmt_all(&e.predicted_mean))
                .chain(pairs.iter().map(|&(i, j)| e.predicted_covariance[i][j].to_string()))
                .chain([e.scaling.to_string(), (e.scaling * lmax).sqrt().to_string()])
                .chain(fmt_all(&e.constraint_values))
                .chain([e.stats.inner_iterations.to_string(), e.stats.fallback.to_string()]),
        );
    }
    out
}

/// Per-step position mean, covariance, eigenvalues and the inflated radius
/// `√(s λmax)` of the bounding ball.
pub fn ellipse_csv(result: &OpenLoopResult, cfg: &ScenarioConfig) -> String {
    let dims = &cfg.chance.position_dims;
    let k = dims.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let mut out = String::new();
    row(
        &mut out,
        ["step".into(), "time".into()]
            .into_iter()
            .chain(named("mean", k))
            .chain(pairs.iter().map(|(i, j)| format!("c_{i}_{j}")))
            .chain(named("eig", k))
            .chain(["s_p".into(), "radius".into()]),
    );
    for (t, (x, c)) in result.states.iter().zip(&result.covariances).enumerate() {
        let sub = c.select_rows(dims).select_columns(dims);
        let mut eig: Vec<f64> = SymmetricEigen::new(sub.clone()).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.total_cmp(b));
        let lmax = eig.last().copied().unwrap_or(0.0).max(0.0);
        let s = result.scaling[t];
        let mean = x.mean();
        row(
            &mut out,
            [t.to_string(), (t as f64 * cfg.dt).to_string()]
                .into_iter()
                .chain(dims.iter().map(|&d| mean[d].to_string()))
                .chain(pairs.iter().map(|&(i, j)| sub[(i, j)].to_string()))
                .chain(fmt_all(&eig))
                .chain([s.to_string(), (s * lmax).sqrt().to_string()]),
        );
    }
    out
}

/// Positions of `count` trajectories obtained by evaluating the predicted
/// expansion at seeded draws of `ξ`.
pub fn gpc_realizations_csv(result: &OpenLoopResult, basis: &BasisSet, cfg: &ScenarioConfig, count: usize, seed: u64) -> Result<String> {
    let dims = &cfg.chance.position_dims;
    let mut out = String::new();
    row(&mut out, ["realization".into(), "step".into(), "time".into()].into_iter().chain(named("p", dims.len())));
    for r in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let xi = sample_xi(basis, &mut rng);
        for (t, x) in result.states.iter().enumerate() {
            let z = x.realize(basis, &xi)?;
            row(
                &mut out,
                [r.to_string(), t.to_string(), (t as f64 * cfg.dt).to_string()]
                    .into_iter()
                    .chain(dims.iter().map(|&d| z[d].to_string())),
            );
        }
    }
    Ok(out)
}

/// Positions of plant trajectories, one block per episode.
pub fn plant_realizations_csv<'a>(trajectories: impl IntoIterator<Item = &'a [Vec<f64>]>, cfg: &ScenarioConfig) -> String {
    let dims = &cfg.chance.position_dims;
    let mut out = String::new();
    row(&mut out, ["realization".into(), "step".into(), "time".into()].into_iter().chain(named("p", dims.len())));
    for (r, traj) in trajectories.into_iter().enumerate() {
        for (t, x) in traj.iter().enumerate() {
            row(
                &mut out,
                [r.to_string(), t.to_string(), (t as f64 * cfg.dt).to_string()]
                    .into_iter()
                    .chain(dims.iter().map(|&d| x[d].to_string())),
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub scenario: String,
    pub cost: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub max_violation: f64,
    pub failure: Option<String>,
    pub final_mean: Vec<f64>,
    pub position_trace_mid: f64,
    pub position_trace_final: f64,
    pub smoothed_eigenvalues: bool,
    pub regularized_covariance: bool,
}

impl SolveSummary {
    pub fn new(cfg: &ScenarioConfig, result: &OpenLoopResult) -> Self {
        let traces = &result.position_traces;
        Self {
            scenario: cfg.name.clone(),
            cost: result.cost,
            outer_iterations: result.report.outer_iterations,
            inner_iterations: result.report.inner_iterations,
            converged: result.report.converged,
            max_violation: result.report.max_violation,
            failure: result.report.failure.clone(),
            final_mean: result.means().last().cloned().unwrap_or_default(),
            position_trace_mid: traces[traces.len() / 2],
            position_trace_final: *traces.last().expect("trajectory includes the initial state"),
            smoothed_eigenvalues: result.report.smoothed_eigenvalues,
            regularized_covariance: result.report.regularized_covariance,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    let _ = writeln!(text);
    write_text(dir, name, &text)
}
