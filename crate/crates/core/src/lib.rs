//! Plant models, feasibility analysis and closed-loop simulation for the approximation-free
//! adaptive barrier controller in [`ptpb_control`].
//!
//! Generic items take a [`Real`] scalar; the aliases below fix it to `f64`.

// `!(x > 0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feasibility;
pub mod model;
pub mod presets;
pub mod sim;

pub use ptpb_control as control;
pub use ptpb_control::{
    lit, to_f64, ConstraintBox, ControlError, GainSet, Real, Reference, TbgProfile,
};

pub use error::{CoreError, Result};
pub use feasibility::{f_bar, g_bar, monte_carlo_region, t_star};
pub use model::{
    estimate_bounds, forward_dynamics, spectral_norm, BoundsOptions, CountingModel,
    DynamicsProvider, ModelCallCounts,
};
pub use sim::{
    compute_metrics, rk4_step, run_batch, run_scenario, ControlHold, IntegrationMode, Metrics,
    SimStatus,
};

pub type JointState = model::JointState<f64>;
pub type ArmParams = model::ArmParams<f64>;
pub type TwoLinkArm = model::TwoLinkArm<f64>;
pub type ModelBounds = model::ModelBounds<f64>;
pub type FeasibilityProblem = feasibility::FeasibilityProblem<f64>;
pub type FeasibilityReport = feasibility::FeasibilityReport<f64>;
pub type Region = feasibility::Region<f64>;
pub type MonteCarloResult = feasibility::MonteCarloResult<f64>;
pub type Scenario = sim::Scenario<f64>;
pub type ReferenceSpec = sim::ReferenceSpec<f64>;
pub type DisturbanceSpec = sim::DisturbanceSpec<f64>;
pub type NoiseSpec = sim::NoiseSpec<f64>;
pub type SimResult = sim::SimResult<f64>;
pub type Sample = sim::Sample<f64>;
