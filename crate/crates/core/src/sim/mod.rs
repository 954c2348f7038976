//! Closed-loop simulation: scenarios, seeded signals, the RK4 engine and metrics.

mod engine;
mod metrics;
mod result;
mod scenario;
mod signals;

pub use engine::{rk4_step, run_batch, run_scenario};
pub use metrics::{compute_metrics, metrics_from_samples, Metrics};
pub use result::{Sample, SimResult, SimStatus};
pub use scenario::{
    ControlHold, DisturbanceSpec, IntegrationMode, NoiseSpec, ReferenceSpec, Scenario,
};
pub use signals::{
    add_measurement_noise, noise_levels, noise_sample, uniform_disturbance, NoiseLevels,
};
