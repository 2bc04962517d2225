//! Event-camera visual servoing in simulation.
//!
//! The crate models a single-axis camera translating over a static scene
//! whose log intensity varies only horizontally. An event sensor reports
//! per-pixel log-intensity changes; per-window net event counts over chosen
//! pixel kernels turn into kinematic state estimates with certified error
//! bounds, and a limit-cycle controller keeps the camera oscillating so the
//! sensor always has signal to report. A numeric certificate establishes
//! exponential stability of the tracking error for small feedback gains.
//!
//! Modules:
//! - [`scene`]: camera intrinsics and structured log-intensity patterns.
//! - [`dvs`]: latched and ideal-fractional event-sensor models.
//! - [`estimator`]: count-to-state maps, error bounds, calibration.
//! - [`plant`]: direction-dependent second-order actuator dynamics.
//! - [`controller`]: limit-cycle tracking control with event feedback.
//! - [`stability`]: quadratic certificate and Floquet cross-check.
//! - [`harness`]: configuration, excitation plans, open/closed-loop runs.

pub mod controller;
pub mod dvs;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod plant;
pub mod scene;
pub mod stability;

pub use error::{Error, Result};
