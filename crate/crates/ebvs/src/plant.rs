//! Longitudinal camera-platform dynamics.
//!
//! A second-order model with direction-dependent lumped constants: viscous
//! damping `p1`, input gain `p2`, and a constant friction offset `p3`, each
//! identified separately for forward and backward travel and blended
//! smoothly across the zero-velocity line with a `tanh` transition. The
//! input is a duty cycle clamped to the actuator range.

use crate::error::{Error, Result};

/// Lumped constants for one travel direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionParams {
    /// Viscous damping, 1/s.
    pub p1: f64,
    /// Input gain, m/s^2 per unit duty cycle.
    pub p2: f64,
    /// Constant friction offset, m/s^2.
    pub p3: f64,
}

/// Full plant description: both directional parameter sets, the blending
/// sharpness, and the duty-cycle clamp.
#[derive(Debug, Clone, Copy)]
pub struct PlantParams {
    pub forward: DirectionParams,
    pub backward: DirectionParams,
    /// Blending sharpness, s/m; larger switches harder near zero velocity.
    pub beta: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl PlantParams {
    /// Parameter sets identified on the target platform.
    pub fn identified() -> Self {
        Self {
            forward: DirectionParams { p1: 2.530, p2: 33.977, p3: 1.349 },
            backward: DirectionParams { p1: 2.954, p2: 37.497, p3: -1.510 },
            beta: 20.0,
            u_min: -1.0,
            u_max: 1.0,
        }
    }

    /// Same constants in both directions; useful for analytic oracles.
    pub fn symmetric(p: DirectionParams) -> Self {
        Self { forward: p, backward: p, beta: 20.0, u_min: -1.0, u_max: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (dir, p) in [("forward", self.forward), ("backward", self.backward)] {
            if !(p.p1.is_finite() && p.p1 > 0.0 && p.p2.is_finite() && p.p2 > 0.0)
                || !p.p3.is_finite()
            {
                return Err(Error::InvalidParameter {
                    name: "plant params",
                    reason: format!("{dir} set {p:?} needs finite p1 > 0, p2 > 0"),
                });
            }
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("got {}, need finite positive", self.beta),
            });
        }
        if !(self.u_min.is_finite() && self.u_max.is_finite() && self.u_min < self.u_max) {
            return Err(Error::InvalidParameter {
                name: "u limits",
                reason: format!("got [{}, {}]", self.u_min, self.u_max),
            });
        }
        Ok(())
    }

    /// Directional constants blended at velocity `x_dot`: the forward set
    /// weighted by `(1 + tanh(beta * x_dot)) / 2`, the backward set by the
    /// complement.
    pub fn blended(&self, x_dot: f64) -> DirectionParams {
        let w = 0.5 * (1.0 + (self.beta * x_dot).tanh());
        let mix = |f: f64, b: f64| f * w + b * (1.0 - w);
        DirectionParams {
            p1: mix(self.forward.p1, self.backward.p1),
            p2: mix(self.forward.p2, self.backward.p2),
            p3: mix(self.forward.p3, self.backward.p3),
        }
    }

    pub fn clamp_input(&self, u: f64) -> f64 {
        u.clamp(self.u_min, self.u_max)
    }
}

/// Camera state along the motion axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub x: f64,
    pub x_dot: f64,
    pub t: f64,
}

impl RobotState {
    pub fn at_rest(x: f64) -> Self {
        Self { x, x_dot: 0.0, t: 0.0 }
    }
}

/// Time derivative of `(x, x_dot)` under duty cycle `u` (clamped here):
/// acceleration is `-p1 * x_dot + p2 * u - p3` with parameters blended at
/// the current velocity.
pub fn dynamics_deriv(state: &RobotState, u: f64, pp: &PlantParams) -> (f64, f64) {
    debug_assert!(state.x.is_finite() && state.x_dot.is_finite() && u.is_finite());
    let p = pp.blended(state.x_dot);
    let u = pp.clamp_input(u);
    (state.x_dot, -p.p1 * state.x_dot + p.p2 * u - p.p3)
}

/// One classical fourth-order step of length `h`, holding `u` constant.
pub fn step_rk4(state: RobotState, u: f64, pp: &PlantParams, h: f64) -> RobotState {
    let eval = |x: f64, v: f64| {
        let s = RobotState { x, x_dot: v, t: state.t };
        dynamics_deriv(&s, u, pp)
    };
    let (k1x, k1v) = eval(state.x, state.x_dot);
    let (k2x, k2v) = eval(state.x + 0.5 * h * k1x, state.x_dot + 0.5 * h * k1v);
    let (k3x, k3v) = eval(state.x + 0.5 * h * k2x, state.x_dot + 0.5 * h * k2v);
    let (k4x, k4v) = eval(state.x + h * k3x, state.x_dot + h * k3v);
    RobotState {
        x: state.x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        x_dot: state.x_dot + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        t: state.t + h,
    }
}
