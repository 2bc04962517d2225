//! Count-based state estimation over pixel kernels.
//!
//! Net event counts over a horizontally symmetric kernel approximate a
//! closed-form rate times the window length: for a quadratic sub-profile the
//! rate is proportional to the position-velocity product, for a linear
//! sub-profile to velocity alone. This module provides the counting, the
//! rate closed forms, the certified window-error bound (a Taylor remainder
//! in time plus a symmetry remainder in space, plus an optional quantization
//! allowance for latched counting), least-squares calibration of the lumped
//! count-per-state constants, and the synthesis of the cubic feedback signal
//! used by the controller.

use crate::dvs::{Event, PixelRect};
use crate::error::{Error, Result};
use crate::scene::{self, CameraIntrinsics, DerivativeSuprema, Profile, ScenePattern};

/// Which sub-profile a counting kernel watches, and therefore which state
/// its net count estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelRole {
    /// Quadratic band: counts estimate position times velocity.
    Quadratic,
    /// Linear band: counts estimate velocity.
    Linear,
}

impl KernelRole {
    pub fn name(self) -> &'static str {
        match self {
            KernelRole::Quadratic => "quadratic",
            KernelRole::Linear => "linear",
        }
    }

    fn is_quadratic(self) -> bool {
        self == KernelRole::Quadratic
    }
}

/// A validated counting kernel: a pixel rectangle that is horizontally
/// symmetric about the principal point and lies entirely inside the scene
/// band matching its role.
#[derive(Debug, Clone, Copy)]
pub struct Kernel {
    rect: PixelRect,
    role: KernelRole,
}

impl Kernel {
    pub fn new(
        role: KernelRole,
        rect: PixelRect,
        pattern: &ScenePattern,
        intr: &CameraIntrinsics,
    ) -> Result<Self> {
        if rect.u_max >= intr.width || rect.v_max >= intr.height {
            return Err(Error::InvalidParameter {
                name: "kernel rect",
                reason: format!("{rect:?} outside sensor {}x{}", intr.width, intr.height),
            });
        }
        // Centered columns must sum to zero, which for a contiguous span
        // means the midpoint of the column range sits on the principal point.
        let mid = (rect.u_min as f64 + rect.u_max as f64) / 2.0;
        if (mid - intr.o_x).abs() > 1e-9 {
            return Err(Error::AsymmetricKernel {
                u_min: rect.u_min,
                u_max: rect.u_max,
                o_x: intr.o_x,
            });
        }
        let (band_lo, band_hi) = pattern
            .band_rows(role.is_quadratic(), intr)
            .ok_or(Error::KernelRoleMismatch { role: role.name() })?;
        if rect.v_min < band_lo || rect.v_max > band_hi {
            return Err(Error::KernelBandMismatch {
                v_min: rect.v_min,
                v_max: rect.v_max,
                expected: role.name(),
            });
        }
        Ok(Self { rect, role })
    }

    pub fn rect(&self) -> PixelRect {
        self.rect
    }

    pub fn role(&self) -> KernelRole {
        self.role
    }

    pub fn n_u(&self) -> u32 {
        self.rect.n_u()
    }

    pub fn n_v(&self) -> u32 {
        self.rect.n_v()
    }

    pub fn pixel_count(&self) -> u64 {
        self.rect.pixel_count()
    }

    /// The sub-profile this kernel watches.
    pub fn profile(&self, pattern: &ScenePattern) -> Profile {
        match self.role {
            KernelRole::Quadratic => pattern.quadratic_part(),
            KernelRole::Linear => pattern.linear_part(),
        }
        .expect("validated at construction")
    }

    /// Closed-form count-rate gain: events per second per state unit. The
    /// state is position times velocity for a quadratic kernel and velocity
    /// for a linear kernel; both gains are negative because a positive shift
    /// of the camera moves the image toward lower coordinates.
    pub fn gain(
        &self,
        pattern: &ScenePattern,
        intr: &CameraIntrinsics,
        contrast: f64,
    ) -> f64 {
        let n = self.pixel_count() as f64;
        match self.profile(pattern) {
            Profile::Quadratic { sigma } => {
                -n * intr.f_x * intr.f_x / (contrast * intr.z * intr.z * sigma * sigma)
            }
            Profile::Linear { k } => -n * intr.f_x * k / (contrast * intr.z),
        }
    }

    /// Lumped constant: events per state unit over one window of `dt`
    /// seconds. This is the quantity calibration recovers.
    pub fn lumped(
        &self,
        pattern: &ScenePattern,
        intr: &CameraIntrinsics,
        contrast: f64,
        dt: f64,
    ) -> f64 {
        self.gain(pattern, intr, contrast) * dt
    }

    /// Instantaneous net event rate predicted at camera state `(x, x_dot)`
    /// and time `t`: minus pixel count times image velocity times the
    /// profile slope at the current relative shift, over the contrast.
    pub fn rate(
        &self,
        pattern: &ScenePattern,
        intr: &CameraIntrinsics,
        contrast: f64,
        x: f64,
        x_dot: f64,
        t: f64,
    ) -> f64 {
        let shift = scene::relative_shift(pattern, intr, x, t);
        let slope = self
            .profile(pattern)
            .derivative(shift, 1)
            .expect("first derivative always defined");
        -(self.pixel_count() as f64) * intr.f_x / (contrast * intr.z) * x_dot * slope
    }

    /// Exact fractional net count accumulated while the camera moves from
    /// `x_start` to `x_end` under a fixed pattern offset `off`.
    pub fn exact_fraction(
        &self,
        pattern: &ScenePattern,
        intr: &CameraIntrinsics,
        contrast: f64,
        x_start: f64,
        x_end: f64,
        off: f64,
    ) -> f64 {
        let g = self.gain(pattern, intr, contrast);
        match self.role {
            KernelRole::Quadratic => {
                let a = x_start - off;
                let b = x_end - off;
                g * (b * b - a * a) / 2.0
            }
            KernelRole::Linear => g * (x_end - x_start),
        }
    }

    /// Centered-coordinate interval the kernel samples while the relative
    /// image shift stays within `[shift_a, shift_b]` pixels.
    pub fn swept_interval(
        &self,
        intr: &CameraIntrinsics,
        shift_a: f64,
        shift_b: f64,
    ) -> (f64, f64) {
        let lo = intr.centered_u(self.rect.u_min) + shift_a.min(shift_b);
        let hi = intr.centered_u(self.rect.u_max) + shift_a.max(shift_b);
        (lo, hi)
    }
}

/// Half-open counting window `[start_us, start_us + len_us)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountWindow {
    pub start_us: i64,
    pub len_us: i64,
}

impl CountWindow {
    pub fn end_us(&self) -> i64 {
        self.start_us + self.len_us
    }

    pub fn contains(&self, t_us: i64) -> bool {
        t_us >= self.start_us && t_us < self.end_us()
    }

    pub fn duration_s(&self) -> f64 {
        self.len_us as f64 * 1e-6
    }

    pub fn start_s(&self) -> f64 {
        self.start_us as f64 * 1e-6
    }

    pub fn midpoint_s(&self) -> f64 {
        (self.start_us as f64 + self.len_us as f64 / 2.0) * 1e-6
    }
}

/// Signed event tally over one kernel and window.
#[derive(Debug, Clone, Copy)]
pub struct NetCount {
    pub n_pos: u64,
    pub n_neg: u64,
    /// Integer-valued for latched streams, real for fractional accumulators.
    pub n_net: f64,
    pub window: CountWindow,
}

impl NetCount {
    /// Wrap a fractional accumulator reading; positive and negative tallies
    /// are not separately defined in that model.
    pub fn fractional(n_net: f64, window: CountWindow) -> Self {
        Self { n_pos: 0, n_neg: 0, n_net, window }
    }
}

/// Count the events of a canonically sorted stream that fall inside the
/// kernel's rectangle and the half-open window.
pub fn net_event_count(events: &[Event], kernel: &Kernel, window: CountWindow) -> NetCount {
    count_in_rect(events, &kernel.rect, window)
}

/// Rectangle-level counting, shared by kernels and diagnostics.
pub fn count_in_rect(events: &[Event], rect: &PixelRect, window: CountWindow) -> NetCount {
    let mut n_pos = 0u64;
    let mut n_neg = 0u64;
    for e in events {
        if window.contains(e.t_us) && rect.contains(e.u as u32, e.v as u32) {
            if e.p > 0 {
                n_pos += 1;
            } else {
                n_neg += 1;
            }
        }
    }
    NetCount { n_pos, n_neg, n_net: n_pos as f64 - n_neg as f64, window }
}

/// Envelope of the camera motion a bound must cover.
#[derive(Debug, Clone, Copy)]
pub struct MotionEnvelope {
    pub v_max: f64,
    pub a_max: f64,
}

impl MotionEnvelope {
    pub fn new(v_max: f64, a_max: f64) -> Result<Self> {
        if !v_max.is_finite() || v_max < 0.0 {
            return Err(Error::InvalidParameter {
                name: "v_max",
                reason: format!("got {v_max}, need finite nonnegative"),
            });
        }
        if !a_max.is_finite() || a_max < 0.0 {
            return Err(Error::InvalidParameter {
                name: "a_max",
                reason: format!("got {a_max}, need finite nonnegative"),
            });
        }
        Ok(Self { v_max, a_max })
    }
}

/// Window-error bound constants: the count deviation over a window of `dt`
/// seconds is at most `l_time * dt^2 + l_space * dt` plus any quantization
/// allowance.
#[derive(Debug, Clone, Copy)]
pub struct BoundConstants {
    /// events / s^2
    pub l_time: f64,
    /// events / s
    pub l_space: f64,
}

impl BoundConstants {
    pub fn allowance(&self, dt: f64, quantization: f64) -> f64 {
        self.l_time * dt * dt + self.l_space * dt + quantization
    }
}

/// Evaluate the bound constants for a kernel: the temporal term comes from a
/// first-order Taylor remainder of the count integral (curvature under
/// velocity, slope under acceleration), the spatial term from the symmetry
/// remainder of the discrete column sum (third derivative over the kernel
/// width).
pub fn bound_constants(
    kernel: &Kernel,
    suprema: &DerivativeSuprema,
    contrast: f64,
    intr: &CameraIntrinsics,
    env: MotionEnvelope,
) -> BoundConstants {
    let n = kernel.pixel_count() as f64;
    let image_v = intr.f_x * env.v_max / intr.z;
    let image_a = intr.f_x * env.a_max / intr.z;
    let l_time = n / (2.0 * contrast) * (suprema.f2 * image_v * image_v + suprema.f1 * image_a);
    let n_u = kernel.n_u() as f64;
    let l_space = n / contrast * (n_u * n_u / 8.0) * image_v * suprema.f3;
    BoundConstants { l_time, l_space }
}

/// Outcome of testing one window against the bound.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub holds: bool,
    /// |measured count - predicted rate * dt|, events.
    pub deviation: f64,
    /// Bound value for this window, events.
    pub allowance: f64,
}

impl BoundCheck {
    /// Slack remaining; negative on violation.
    pub fn margin(&self) -> f64 {
        self.allowance - self.deviation
    }
}

/// Compare a measured net count against `rate * dt` under the bound
/// constants; `quantization` adds the latched-mode pixel-count allowance and
/// is zero for fractional streams.
pub fn check_bound(
    n_net: f64,
    rate: f64,
    dt: f64,
    constants: &BoundConstants,
    quantization: f64,
) -> BoundCheck {
    let deviation = (n_net - rate * dt).abs();
    let allowance = constants.allowance(dt, quantization);
    BoundCheck { holds: deviation <= allowance, deviation, allowance }
}

/// One calibration observation: a window's net count and the ground-truth
/// state it should be proportional to (position times velocity for a
/// quadratic kernel, velocity for a linear kernel).
#[derive(Debug, Clone, Copy)]
pub struct CalibrationSample {
    pub count: f64,
    pub state: f64,
}

/// Least-squares lumped constant (events per state unit per window) with
/// the length-normalized fit residual in state units.
#[derive(Debug, Clone, Copy)]
pub struct LumpedConstant {
    pub value: f64,
    /// (1 / N_s) * l2-norm of (count / value - state).
    pub fit_residual: f64,
    /// (1 / N_s) * l2-norm of the ground-truth states, for relative error.
    pub state_scale: f64,
}

impl LumpedConstant {
    pub fn relative_residual(&self) -> f64 {
        self.fit_residual / self.state_scale
    }
}

/// Fit `count = value * state` by least squares through the origin.
pub fn calibrate(samples: &[CalibrationSample]) -> Result<LumpedConstant> {
    if samples.len() < 2 {
        return Err(Error::DegenerateCalibration {
            reason: format!("need at least 2 samples, got {}", samples.len()),
        });
    }
    let mut cross = 0.0;
    let mut ss = 0.0;
    for s in samples {
        if !s.count.is_finite() || !s.state.is_finite() {
            return Err(Error::NonFinite { context: "calibration sample" });
        }
        cross += s.count * s.state;
        ss += s.state * s.state;
    }
    if ss == 0.0 {
        return Err(Error::DegenerateCalibration {
            reason: "all ground-truth states are zero".into(),
        });
    }
    let value = cross / ss;
    if value == 0.0 || !value.is_finite() {
        return Err(Error::DegenerateCalibration {
            reason: format!("fitted lumped constant is {value}"),
        });
    }
    let n_s = samples.len() as f64;
    let mut err_sq = 0.0;
    let mut state_sq = 0.0;
    for s in samples {
        let e = s.count / value - s.state;
        err_sq += e * e;
        state_sq += s.state * s.state;
    }
    Ok(LumpedConstant {
        value,
        fit_residual: err_sq.sqrt() / n_s,
        state_scale: state_sq.sqrt() / n_s,
    })
}

/// Turn a pair of window counts into the cubic feedback signal: the
/// quadratic kernel's count over its lumped constant estimates position
/// times velocity, the linear kernel's estimates velocity, and their
/// product estimates position times velocity squared.
pub fn synthesize_feedback(
    quad_count: f64,
    lin_count: f64,
    quad_lumped: f64,
    lin_lumped: f64,
) -> f64 {
    (quad_count / quad_lumped) * (lin_count / lin_lumped)
}

/// Calibrated count-to-state converter for the closed loop.
#[derive(Debug, Clone, Copy)]
pub struct FeedbackSynthesizer {
    quad_lumped: f64,
    lin_lumped: f64,
}

impl FeedbackSynthesizer {
    pub fn new(quad_lumped: f64, lin_lumped: f64) -> Result<Self> {
        for (name, v) in [("quadratic lumped constant", quad_lumped), ("linear lumped constant", lin_lumped)] {
            if v == 0.0 || !v.is_finite() {
                return Err(Error::DegenerateCalibration {
                    reason: format!("{name} is {v}"),
                });
            }
        }
        Ok(Self { quad_lumped, lin_lumped })
    }

    /// Estimated velocity from the linear kernel's window count.
    pub fn velocity(&self, lin_count: f64) -> f64 {
        lin_count / self.lin_lumped
    }

    /// Estimated position-velocity product from the quadratic kernel's
    /// window count.
    pub fn product_xv(&self, quad_count: f64) -> f64 {
        quad_count / self.quad_lumped
    }

    /// Estimated position times velocity squared.
    pub fn feedback(&self, quad_count: f64, lin_count: f64) -> f64 {
        self.product_xv(quad_count) * self.velocity(lin_count)
    }
}
