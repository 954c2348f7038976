//! Approximation-free adaptive barrier control for Euler-Lagrange systems under state,
//! input and temporal constraints.
//!
//! This crate holds the control law only. It has no access to the plant model: every
//! function here consumes measured states, reference samples and gains.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases at the crate
//! root fix the scalar to `f64`.

// `!(x > 0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod controller;
pub mod error;
pub mod gains;
pub mod pipeline;
pub mod scalar;
pub mod tbg;

pub use constraints::ConstraintBox as GenericConstraintBox;
pub use controller::{
    barrier_gain, control_step, gamma_fn, raw_command, saturate, saturation_diag, LawInputs,
};
pub use error::{ControlError, Result};
pub use gains::{d_norm, GainSet as GenericGainSet};
pub use pipeline::{
    d_times, dynamic_bounds, error_signals, filtered_error, phi_rate, phi_vectors, phi_vectors_raw,
    recover_xi, tracking_error, transformed_error, upsilon_derivative, upsilon_init, xi_derivative,
    Branch,
};
pub use scalar::{lit, to_f64, Real};
pub use tbg::k_constants;

pub type ConstraintBox = constraints::ConstraintBox<f64>;
pub type GainSet = gains::GainSet<f64>;
pub type TbgProfile = tbg::TbgProfile<f64>;
pub type TbgValues = tbg::TbgValues<f64>;
pub type TbgBounds = tbg::TbgBounds<f64>;
pub type ErrorRefs = tbg::ErrorRefs<f64>;
pub type Reference = pipeline::Reference<f64>;
pub type DynamicBounds = pipeline::DynamicBounds<f64>;
pub type PhiVectors = pipeline::PhiVectors<f64>;
pub type ErrorSignals = pipeline::ErrorSignals<f64>;
pub type ControlOutput = controller::ControlOutput<f64>;
