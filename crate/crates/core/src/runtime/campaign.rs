use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::constraints::CircleObstacle;
use crate::error::{Error, Result};
use crate::runtime::mpc::open_loop_with;
use crate::runtime::{run_mpc, sample_true_params, MpcContext, PlantSim, ScenarioConfig, Setup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    /// One full-horizon gPC solve; its control sequence is replayed open loop.
    OpenLoopGpc,
    MpcGpc,
    /// Receding horizon on the mean-parameter model without inflation.
    MpcDeterministic,
}

impl McMode {
    pub const ALL: [McMode; 3] = [McMode::OpenLoopGpc, McMode::MpcGpc, McMode::MpcDeterministic];

    pub fn as_str(self) -> &'static str {
        match self {
            McMode::OpenLoopGpc => "open_loop_gpc",
            McMode::MpcGpc => "mpc_gpc",
            McMode::MpcDeterministic => "mpc_deterministic",
        }
    }
}

impl fmt::Display for McMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for McMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        McMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`; expected open_loop_gpc, mpc_gpc or mpc_deterministic")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub index: usize,
    pub params: Vec<f64>,
    pub final_position: Vec<f64>,
    /// Distance from the final position to the target position.
    pub final_error: f64,
    pub collided: bool,
    /// Smallest distance to any obstacle surface over the episode.
    pub min_clearance: f64,
    pub fallbacks: usize,
    pub failure: Option<String>,
}

impl EpisodeSummary {
    pub fn succeeded_within(&self, radius: f64) -> bool {
        self.failure.is_none() && !self.collided && self.final_error <= radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: String,
    pub mode: McMode,
    pub seed: u64,
    pub n_realizations: usize,
    /// Episodes that finished without entering any obstacle.
    pub collision_free_count: usize,
    pub collision_free_rate: f64,
    pub failed_count: usize,
    pub fallback_steps: usize,
    pub mean_final_error: f64,
    pub max_final_error: f64,
    /// Trace of the ensemble covariance of plant positions at every step.
    pub variance_trace: Vec<f64>,
    pub episodes: Vec<EpisodeSummary>,
    /// Wall-clock seconds; kept out of the serialized report so that reports
    /// are reproducible byte for byte.
    #[serde(skip)]
    pub elapsed_secs: f64,
}

impl McReport {
    pub fn success_count(&self, radius: f64) -> usize {
        self.episodes.iter().filter(|e| e.succeeded_within(radius)).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn clearance(x: &[f64], obstacles: &[CircleObstacle], dims: &[usize]) -> f64 {
    obstacles
        .iter()
        .map(|o| {
            let d2: f64 = dims.iter().zip(&o.center).map(|(&d, c)| (x[d] - c).powi(2)).sum();
            d2.sqrt() - o.radius
        })
        .fold(f64::INFINITY, f64::min)
}

struct Episode {
    states: Vec<Vec<f64>>,
    params: Vec<f64>,
    fallbacks: usize,
    failure: Option<String>,
}

fn summarize(cfg: &ScenarioConfig, index: usize, ep: &Episode) -> EpisodeSummary {
    let dims = &cfg.chance.position_dims;
    let last = ep.states.last().expect("episodes include the initial state");
    let final_position: Vec<f64> = dims.iter().map(|&d| last[d]).collect();
    let final_error = dims
        .iter()
        .zip(&final_position)
        .map(|(&d, p)| (p - cfg.target[d]).powi(2))
        .sum::<f64>()
        .sqrt();
    let collided = ep.states.iter().any(|x| {
        let z: Vec<f64> = dims.iter().map(|&d| x[d]).collect();
        cfg.obstacles.iter().any(|o| o.contains(&z))
    });
    let min_clearance = ep
        .states
        .iter()
        .map(|x| clearance(x, &cfg.obstacles, dims))
        .fold(f64::INFINITY, f64::min);
    EpisodeSummary {
        index,
        params: ep.params.clone(),
        final_position,
        final_error,
        collided,
        min_clearance,
        fallbacks: ep.fallbacks,
        failure: ep.failure.clone(),
    }
}

fn ensemble_trace(episodes: &[Episode], dims: &[usize], steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|t| {
            let pts: Vec<DVector<f64>> = episodes
                .iter()
                .filter_map(|e| e.states.get(t))
                .map(|x| DVector::from_iterator(dims.len(), dims.iter().map(|&d| x[d])))
                .collect();
            if pts.len() < 2 {
                return 0.0;
            }
            let n = pts.len() as f64;
            let mean = pts.iter().fold(DVector::zeros(dims.len()), |acc, p| acc + p) / n;
            pts.iter().map(|p| (p - &mean).norm_squared()).sum::<f64>() / (n - 1.0)
        })
        .collect()
}

/// Runs `n_real` episodes, each against a plant whose true parameters are
/// drawn from stream `index` of `seed`. Episodes with the same seed and index
/// share their plant across modes.
pub fn monte_carlo(cfg: &ScenarioConfig, mode: McMode, n_real: usize, seed: u64) -> Result<McReport> {
    monte_carlo_detailed(cfg, mode, n_real, seed).map(|(report, _)| report)
}

/// [`monte_carlo`] that also returns every plant trajectory.
#[allow(clippy::type_complexity)]
pub fn monte_carlo_detailed(
    cfg: &ScenarioConfig,
    mode: McMode,
    n_real: usize,
    seed: u64,
) -> Result<(McReport, Vec<Vec<Vec<f64>>>)> {
    if n_real == 0 {
        return Err(Error::InvalidArgument("at least one realization is required".into()));
    }
    let start = Instant::now();
    let mut episodes = Vec::with_capacity(n_real);
    match mode {
        McMode::OpenLoopGpc => {
            let plan = open_loop_with(cfg, &Setup::gpc(cfg)?)?;
            for i in 0..n_real {
                let mut plant = PlantSim::from_scenario(cfg, seed, i as u64);
                let mut failure = None;
                for u in &plan.controls {
                    if let Err(e) = plant.step(u.as_slice()) {
                        failure = Some(e.to_string());
                        break;
                    }
                }
                episodes.push(Episode {
                    states: plant.trajectory().to_vec(),
                    params: plant.params().to_vec(),
                    fallbacks: 0,
                    failure,
                });
            }
        }
        McMode::MpcGpc | McMode::MpcDeterministic => {
            let ctx = if mode == McMode::MpcGpc {
                MpcContext::gpc(cfg)?
            } else {
                MpcContext::deterministic(cfg)?
            };
            for i in 0..n_real {
                let mut plant = PlantSim::from_scenario(cfg, seed, i as u64);
                let (fallbacks, failure) = match run_mpc(&ctx, &mut plant) {
                    Ok(log) => (log.fallback_count(), None),
                    Err(e) => (0, Some(e.to_string())),
                };
                episodes.push(Episode {
                    states: plant.trajectory().to_vec(),
                    params: sample_true_params(cfg, seed, i as u64),
                    fallbacks,
                    failure,
                });
            }
        }
    }

    let summaries: Vec<EpisodeSummary> = episodes.iter().enumerate().map(|(i, e)| summarize(cfg, i, e)).collect();
    let collision_free_count = summaries.iter().filter(|s| s.failure.is_none() && !s.collided).count();
    let errors: Vec<f64> = summaries.iter().map(|s| s.final_error).collect();
    let report = McReport {
        scenario: cfg.name.clone(),
        mode,
        seed,
        n_realizations: n_real,
        collision_free_count,
        collision_free_rate: collision_free_count as f64 / n_real as f64,
        failed_count: summaries.iter().filter(|s| s.failure.is_some()).count(),
        fallback_steps: summaries.iter().map(|s| s.fallbacks).sum(),
        mean_final_error: errors.iter().sum::<f64>() / n_real as f64,
        max_final_error: errors.iter().copied().fold(0.0, f64::max),
        variance_trace: ensemble_trace(&episodes, &cfg.chance.position_dims, cfg.horizon),
        episodes: summaries,
        elapsed_secs: start.elapsed().as_secs_f64(),
    };
    Ok((report, episodes.into_iter().map(|e| e.states).collect()))
}
