//! Discrete-time model-free control with Hölder-continuous finite-time-stable
//! feedback: ultra-local-model disturbance observers, tracking laws, an output
//! noise filter, plant models and a closed-loop simulation harness.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fts_core;
pub mod output_filter;
pub mod plant_models;
pub mod sim;
pub mod tracking_control;
pub mod ulm_observer;

pub use error::{Error, Result};
