use thiserror::Error;

/// Errors raised by scene, sensor, estimator, plant, stability, and harness
/// operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate ({u}, {v}) outside sensor extent {width}x{height}")]
    OutOfExtent { u: f64, v: u32, width: u32, height: u32 },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step timestamp {t_us} us does not advance past {prev_us} us")]
    NonMonotoneTimestamp { t_us: i64, prev_us: i64 },

    #[error(
        "kernel columns [{u_min}, {u_max}] are not symmetric about the principal point o_x = {o_x}"
    )]
    AsymmetricKernel { u_min: u32, u_max: u32, o_x: f64 },

    #[error("kernel rows [{v_min}, {v_max}] do not lie inside the {expected} band of the scene")]
    KernelBandMismatch { v_min: u32, v_max: u32, expected: &'static str },

    #[error("scene provides no {role} profile for this kernel role")]
    KernelRoleMismatch { role: &'static str },

    #[error("degenerate calibration: {reason}")]
    DegenerateCalibration { reason: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("integration step {h} s too coarse; need h <= {max} s")]
    StepTooCoarse { h: f64, max: f64 },

    #[error("plant diverged at t = {t:.3} s: |x| = {x:.3} m exceeds scene half-extent {extent:.3} m")]
    Diverged { t: f64, x: f64, extent: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
