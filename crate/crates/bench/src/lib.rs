//! Fixtures shared by the criterion benchmarks under `benches/`.

use gpc_cddp::runtime::Setup;
use gpc_cddp::{GpcVector, ScenarioConfig};

/// A mid-trajectory robot state with nonzero higher-order coefficients,
/// obtained by propagating the bundled scenario a few steps.
pub fn robot_state(setup: &Setup, steps: usize) -> GpcVector {
    let mut x = setup.model.lift(&[0.0, 0.0, 0.0]);
    for _ in 0..steps {
        x = setup.model.euler_step(setup.dynamics.as_ref(), &x, &[4.0, 3.0], 0.02).expect("finite rollout");
    }
    x
}

pub fn robot_setup() -> Setup {
    Setup::gpc(&ScenarioConfig::desk_robot()).expect("bundled scenario")
}

pub fn quadrotor_setup() -> Setup {
    Setup::gpc(&ScenarioConfig::desk_quadrotor()).expect("bundled scenario")
}
