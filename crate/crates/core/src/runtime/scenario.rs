//! JSON scenario description and the objects built from it.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::{AlOptions, ChanceSampler, ChanceSpec, CircleObstacle};
use crate::ddp::{BoxLimits, CostModel, SolverOptions};
use crate::error::{Error, Result};
use crate::gpc::{GpcModel, GpcVector, UncertainParam};
use crate::models::{Dynamics, Quadrotor, QuadrotorConstants, Unicycle};
use crate::orthopoly::{BasisSet, PolyFamily};

pub const DESK_ROBOT: &str = include_str!("../../../../scenarios/robot.json");
pub const DESK_QUADROTOR: &str = include_str!("../../../../scenarios/quadrotor.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Unicycle,
    Quadrotor {
        #[serde(default)]
        constants: QuadrotorConstants,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Arc<dyn Dynamics> {
        match self {
            ModelSpec::Unicycle => Arc::new(Unicycle),
            ModelSpec::Quadrotor { constants } => Arc::new(Quadrotor::new(*constants)),
        }
    }
}

/// One uncertain parameter: `mean + spread · ξ` with `ξ` standard normal
/// (Hermite) or uniform on `[-1, 1]` (Legendre).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub family: PolyFamily,
    pub mean: f64,
    pub spread: f64,
}

/// Diagonal weights. `moment` applies to every coefficient `j ≥ 1` of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub state: Vec<f64>,
    pub moment: Vec<f64>,
    pub control: Vec<f64>,
    pub terminal: Vec<f64>,
    pub terminal_moment: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Base seed for sampling true plant parameters.
    pub plant: u64,
    /// Base seed for Monte Carlo campaigns.
    pub mc: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelSpec,
    pub params: Vec<ParamSpec>,
    /// Total polynomial order `r`.
    pub order: usize,
    /// Gauss nodes per random dimension; defaults to `order + 2`.
    #[serde(default)]
    pub quad_level: Option<usize>,
    pub dt: f64,
    /// Total number of steps `N`.
    pub horizon: usize,
    /// Receding-horizon prediction length `H`.
    pub prediction_horizon: usize,
    pub initial_state: Vec<f64>,
    pub target: Vec<f64>,
    pub initial_control: Vec<f64>,
    pub cost: CostSpec,
    #[serde(default)]
    pub obstacles: Vec<CircleObstacle>,
    pub chance: ChanceSpec,
    pub limits: BoxLimits,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Inner solver options inside each receding-horizon cycle.
    #[serde(default)]
    pub mpc_solver: Option<SolverOptions>,
    #[serde(default)]
    pub al: AlOptions,
    pub seeds: Seeds,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn desk_robot() -> Self {
        Self::from_json(DESK_ROBOT).expect("bundled robot scenario is valid")
    }

    pub fn desk_quadrotor() -> Self {
        Self::from_json(DESK_QUADROTOR).expect("bundled quadrotor scenario is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let dyn_model = self.model.build();
        let (n, m) = (dyn_model.state_dim(), dyn_model.control_dim());
        let names = dyn_model.param_names();
        if self.params.len() != names.len() {
            return bad(format!("model expects {} parameters, got {}", names.len(), self.params.len()));
        }
        for (p, expected) in self.params.iter().zip(names) {
            if p.name != *expected {
                return bad(format!("parameter `{}` found where `{expected}` was expected", p.name));
            }
            if p.spread < 0.0 || !p.spread.is_finite() || !p.mean.is_finite() {
                return bad(format!("parameter `{}` needs a finite mean and nonnegative spread", p.name));
            }
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.prediction_horizon == 0 || self.prediction_horizon > self.horizon {
            return bad(format!(
                "prediction_horizon must be in 1..={}, got {}",
                self.horizon, self.prediction_horizon
            ));
        }
        if self.quad_level == Some(0) {
            return bad("quad_level must be at least 1".into());
        }
        let checks: [(&str, usize, usize); 9] = [
            ("initial_state", self.initial_state.len(), n),
            ("target", self.target.len(), n),
            ("initial_control", self.initial_control.len(), m),
            ("cost.state", self.cost.state.len(), n),
            ("cost.moment", self.cost.moment.len(), n),
            ("cost.control", self.cost.control.len(), m),
            ("cost.terminal", self.cost.terminal.len(), n),
            ("cost.terminal_moment", self.cost.terminal_moment.len(), n),
            ("limits", self.limits.dim(), m),
        ];
        for (what, got, want) in checks {
            if got != want {
                return bad(format!("{what} has length {got}, expected {want}"));
            }
        }
        if self.cost.control.iter().any(|r| !(*r > 0.0)) {
            return bad("control weights must be positive".into());
        }
        let weights = [&self.cost.state, &self.cost.moment, &self.cost.terminal, &self.cost.terminal_moment];
        if weights.iter().any(|w| w.iter().any(|v| !(*v >= 0.0))) {
            return bad("state weights must be nonnegative".into());
        }
        BoxLimits::new(self.limits.lower.clone(), self.limits.upper.clone()).map_err(|e| Error::Config(e.to_string()))?;
        self.chance.validate().map_err(|e| Error::Config(format!("chance: {e}")))?;
        if let Some(&d) = self.chance.position_dims.iter().find(|&&d| d >= n) {
            return bad(format!("position dimension {d} out of range for {n} states"));
        }
        for (i, obs) in self.obstacles.iter().enumerate() {
            if obs.center.len() != self.chance.position_dims.len() {
                return bad(format!("obstacle {i} center has the wrong dimension"));
            }
            if !(obs.radius > 0.0) {
                return bad(format!("obstacle {i} radius must be positive"));
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.initial_state.len()
    }

    pub fn control_dim(&self) -> usize {
        self.initial_control.len()
    }

    pub fn families(&self) -> Vec<PolyFamily> {
        self.params.iter().map(|p| p.family).collect()
    }

    pub fn mean_params(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.mean).collect()
    }

    /// Copy with every parameter made deterministic.
    pub fn without_uncertainty(&self) -> Self {
        let mut out = self.clone();
        for p in &mut out.params {
            p.spread = 0.0;
        }
        out
    }

    pub fn mpc_solver_options(&self) -> SolverOptions {
        self.mpc_solver.clone().unwrap_or_else(|| self.solver.clone())
    }
}

/// Solver-side objects for one scenario. The plant's true parameters are
/// deliberately absent.
pub struct Setup {
    pub dynamics: Arc<dyn Dynamics>,
    pub model: GpcModel,
    pub cost: CostModel,
    pub limits: BoxLimits,
    pub obstacles: Vec<CircleObstacle>,
    pub sampler: ChanceSampler,
    pub target: GpcVector,
}

impl Setup {
    /// Full gPC model of the scenario.
    pub fn gpc(cfg: &ScenarioConfig) -> Result<Self> {
        let q = cfg.quad_level.unwrap_or(cfg.order + 2);
        Self::build(cfg, cfg.order, q, true)
    }

    /// Mean-parameter model without uncertainty propagation.
    pub fn deterministic(cfg: &ScenarioConfig) -> Result<Self> {
        Self::build(cfg, 0, 1, false)
    }

    fn build(cfg: &ScenarioConfig, order: usize, quad_level: usize, uncertain: bool) -> Result<Self> {
        let dynamics = cfg.model.build();
        let (n, m) = (dynamics.state_dim(), dynamics.control_dim());
        let basis = BasisSet::new(&cfg.families(), order)?;
        let params = cfg
            .params
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let spread = if uncertain { p.spread } else { 0.0 };
                UncertainParam::new(p.name.clone(), p.family, p.mean, spread, k)
            })
            .collect::<Result<Vec<_>>>()?;
        let model = GpcModel::with_gauss(basis, quad_level, params, n, m)?;
        let terms = model.terms();

        let weights = |mean: &[f64], moment: &[f64]| -> Vec<Vec<f64>> {
            mean.iter()
                .zip(moment)
                .map(|(&a0, &aj)| std::iter::once(a0).chain(std::iter::repeat_n(aj, terms - 1)).collect())
                .collect()
        };
        let target = model.lift(&cfg.target);
        let cost = CostModel {
            state_weight: CostModel::moment_weighted(model.basis(), &weights(&cfg.cost.state, &cfg.cost.moment)),
            control_weight: DMatrix::from_diagonal(&DVector::from_column_slice(&cfg.cost.control)),
            terminal_weight: CostModel::moment_weighted(
                model.basis(),
                &weights(&cfg.cost.terminal, &cfg.cost.terminal_moment),
            ),
            targets: vec![target.data().clone()],
        };
        let sampler = ChanceSampler::new(model.basis(), cfg.chance.clone())?;
        Ok(Self {
            dynamics,
            model,
            cost,
            limits: cfg.limits.clone(),
            obstacles: cfg.obstacles.clone(),
            sampler,
            target,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        let robot = ScenarioConfig::desk_robot();
        assert_eq!(robot.horizon, 60);
        assert_eq!(robot.prediction_horizon, 10);
        assert_eq!(robot.order, 2);
        assert_eq!(robot.dt, 0.02);
        assert_eq!(robot.chance.p, 0.95);
        let quad = ScenarioConfig::desk_quadrotor();
        assert_eq!(quad.horizon, 100);
        assert_eq!(quad.prediction_horizon, 25);
        assert_eq!(quad.limits.lower, vec![0.0; 4]);
        assert_eq!(quad.limits.upper, vec![3.0; 4]);
    }

    #[test]
    fn round_trip_json() {
        let robot = ScenarioConfig::desk_robot();
        let again = ScenarioConfig::from_json(&robot.to_json()).unwrap();
        assert_eq!(robot, again);
    }

    #[test]
    fn rejects_bad_configs() {
        let err = ScenarioConfig::from_json("{ \"name\": 3 }").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");

        let mut cfg = ScenarioConfig::desk_robot();
        cfg.prediction_horizon = 100;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::desk_robot();
        cfg.target.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::desk_robot();
        cfg.params[0].name = "radius".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn setups_have_expected_sizes() {
        let cfg = ScenarioConfig::desk_robot();
        let gpc = Setup::gpc(&cfg).unwrap();
        assert_eq!(gpc.model.coeff_dim(), 30);
        assert_eq!(gpc.model.quadrature().len(), 64);
        let det = Setup::deterministic(&cfg).unwrap();
        assert_eq!(det.model.coeff_dim(), 3);
        assert_eq!(det.model.node_params(0), &[0.2, 0.2, 0.2]);
    }
}
