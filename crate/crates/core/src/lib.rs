//! Chance-constrained trajectory optimization under parametric uncertainty.
//!
//! Uncertain parameters are propagated through nonlinear dynamics with a
//! polynomial chaos expansion ([`gpc`]); the resulting deterministic
//! coefficient dynamics are optimized with control-limited iLQR ([`ddp`])
//! inside an augmented-Lagrangian loop that enforces probabilistic obstacle
//! constraints ([`constraints`]). [`runtime`] runs the solver in a receding
//! horizon against a simulated plant.

pub mod constraints;
pub mod ddp;
pub mod error;
pub mod gpc;
pub mod models;
pub mod orthopoly;
pub mod runtime;

pub use error::{Error, Result};
pub use gpc::{GpcModel, GpcVector, UncertainParam};
pub use models::{Dynamics, Quadrotor, QuadrotorConstants, Unicycle};
pub use orthopoly::{BasisSet, MultiIndex, PolyFamily, QuadratureRule};
pub use constraints::{AlOptions, AlState, ChanceSpec, CircleObstacle};
pub use ddp::{BoxLimits, CostModel, SolverOptions};
pub use runtime::{McMode, McReport, MpcLog, ScenarioConfig};
