//! Receding-horizon execution against a simulated plant, Monte Carlo
//! campaigns, scenario files and plot-ready exports.

mod campaign;
pub mod export;
mod mpc;
mod plant;
mod scenario;
pub mod validate;

pub use campaign::{monte_carlo, monte_carlo_detailed, EpisodeSummary, McMode, McReport};
pub use mpc::{mpc_step, run_mpc, run_open_loop, CycleStats, MpcContext, MpcEntry, MpcLog, OpenLoopResult, WarmStart};
pub use plant::{sample_true_params, PlantSim};
pub use scenario::{CostSpec, ModelSpec, ParamSpec, ScenarioConfig, Seeds, Setup, DESK_QUADROTOR, DESK_ROBOT};
