//! Limit-cycle tracking control with active sensing.
//!
//! The reference orbit is a sinusoid `x*(t) = a sin(omega t)`; keeping the
//! camera on it guarantees the event sensor always sees motion. The control
//! law inverts the plant along the orbit (feedforward) and adds a feedback
//! correction proportional to the difference between the measured cubic
//! signal `x * x_dot^2` and its on-orbit value. The product `delta = K a^2`
//! is the small parameter governing the stability certificate.

use crate::error::{Error, Result};
use crate::plant::DirectionParams;

#[derive(Debug, Clone, Copy)]
pub struct ControllerParams {
    /// Orbit amplitude, metres.
    pub amplitude: f64,
    /// Orbit angular frequency, rad/s.
    pub omega: f64,
    /// Feedback gain on the cubic signal.
    pub gain: f64,
}

/// Reference state on the orbit at some time.
#[derive(Debug, Clone, Copy)]
pub struct Reference {
    pub x: f64,
    pub x_dot: f64,
}

impl ControllerParams {
    pub fn new(amplitude: f64, omega: f64, gain: f64) -> Result<Self> {
        let cp = Self { amplitude, omega, gain };
        cp.validate()?;
        Ok(cp)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: f64, ok: bool| -> Result<()> {
            if !v.is_finite() || !ok {
                return Err(Error::InvalidParameter { name, reason: format!("got {v}") });
            }
            Ok(())
        };
        check("amplitude", self.amplitude, self.amplitude > 0.0)?;
        check("omega", self.omega, self.omega > 0.0)?;
        check("gain", self.gain, self.gain >= 0.0)
    }

    /// The dimensionless feedback strength `K * a^2`.
    pub fn delta(&self) -> f64 {
        self.gain * self.amplitude * self.amplitude
    }

    /// Orbit period, seconds.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }

    pub fn reference(&self, t: f64) -> Reference {
        let (s, c) = (self.omega * t).sin_cos();
        Reference { x: self.amplitude * s, x_dot: self.amplitude * self.omega * c }
    }

    /// On-orbit value of the cubic feedback signal,
    /// `a^3 omega^2 sin(omega t) cos^2(omega t)`.
    pub fn orbit_feedback(&self, t: f64) -> f64 {
        let (s, c) = (self.omega * t).sin_cos();
        self.amplitude.powi(3) * self.omega * self.omega * s * c * c
    }

    /// Duty cycle: plant inversion along the orbit plus the gated cubic
    /// correction, using the supplied effective plant constants. The result
    /// is unclamped; the caller applies the actuator limits.
    pub fn control_input(&self, eff: DirectionParams, t: f64, fb: f64) -> f64 {
        let (s, c) = (self.omega * t).sin_cos();
        let a = self.amplitude;
        let w = self.omega;
        let feedforward = eff.p1 * a * w * c - a * w * w * s + eff.p3;
        let correction = self.gain * (fb - self.orbit_feedback(t));
        (feedforward - correction) / eff.p2
    }
}
