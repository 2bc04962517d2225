//! Run configuration: a sectioned plain-text file deserialized into typed
//! blocks, then resolved into a validated [`SimSetup`] with every derived
//! quantity (kernels, microsecond clocks, offset schedule) precomputed.
//! Unknown keys and missing required keys are hard errors so that a typo
//! never silently runs with defaults.

use serde::Deserialize;

use crate::controller::ControllerParams;
use crate::dvs::{DvsConfig, DvsMode, PixelRect};
use crate::error::{Error, Result};
use crate::estimator::{Kernel, KernelRole, MotionEnvelope};
use crate::plant::{DirectionParams, PlantParams};
use crate::scene::{CameraIntrinsics, OffsetSchedule, Profile, ScenePattern};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub scene: SceneBlock,
    #[serde(default)]
    pub camera: CameraBlock,
    #[serde(default)]
    pub plant: PlantBlock,
    pub controller: ControllerBlock,
    #[serde(default)]
    pub estimator: EstimatorBlock,
    #[serde(default)]
    pub sim: SimBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Quadratic band above the split row, linear band below.
    DualSplit,
    Quadratic,
    Linear,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneBlock {
    pub kind: SceneKind,
    /// Quadratic spread, pixels.
    pub sigma: f64,
    /// Linear slope, log intensity per pixel.
    pub k: f64,
    /// First row of the linear band; defaults to half the sensor height.
    pub split_row: Option<u32>,
}

impl Default for SceneBlock {
    fn default() -> Self {
        Self { kind: SceneKind::DualSplit, sigma: 330.0, k: 1.299e-3, split_row: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraBlock {
    pub f_x: f64,
    pub f_y: f64,
    /// Principal point; defaults to the sensor center.
    pub o_x: Option<f64>,
    pub o_y: Option<f64>,
    pub width: u32,
    pub height: u32,
    /// Scene-plane depth, metres.
    pub z: f64,
}

impl Default for CameraBlock {
    fn default() -> Self {
        Self { f_x: 1000.0, f_y: 1000.0, o_x: None, o_y: None, width: 1280, height: 720, z: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantBlock {
    /// (p1, p2, p3) for forward travel.
    pub forward: [f64; 3],
    pub backward: [f64; 3],
    pub beta: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for PlantBlock {
    fn default() -> Self {
        let pp = PlantParams::identified();
        Self {
            forward: [pp.forward.p1, pp.forward.p2, pp.forward.p3],
            backward: [pp.backward.p1, pp.backward.p2, pp.backward.p3],
            beta: pp.beta,
            u_min: pp.u_min,
            u_max: pp.u_max,
        }
    }
}

/// The one block without defaults: the orbit must be chosen deliberately.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerBlock {
    /// Orbit amplitude, metres.
    pub a: f64,
    /// Orbit angular frequency, rad/s.
    pub omega: f64,
    /// Feedback gain on the cubic signal.
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorMode {
    Latched,
    Fractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    /// Synthesize feedback from windowed event counts.
    Events,
    /// Bypass the sensor: exact state feedback (ablation).
    Perfect,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorBlock {
    pub contrast: f64,
    pub mode: SensorMode,
    pub threshold_jitter: f64,
    /// Counting kernel as [u_min, u_max, v_min, v_max]; defaults to a
    /// centered rectangle inside the matching band.
    pub quad_kernel: Option<[u32; 4]>,
    pub lin_kernel: Option<[u32; 4]>,
    /// Sensing-to-actuation delay in whole windows.
    pub latency_windows: u32,
    pub feedback: FeedbackKind,
}

impl Default for EstimatorBlock {
    fn default() -> Self {
        Self {
            contrast: 0.2,
            mode: SensorMode::Latched,
            threshold_jitter: 0.0,
            quad_kernel: None,
            lin_kernel: None,
            latency_windows: 1,
            feedback: FeedbackKind::Events,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimBlock {
    /// Total simulated time, seconds.
    pub duration: f64,
    /// Sensing window, seconds.
    pub dt: f64,
    /// Integrator step, seconds.
    pub h: f64,
    pub seed: u64,
    pub x0: f64,
    pub v0: f64,
    /// Excitation velocity cap, m/s.
    pub v_max: f64,
    /// Excitation acceleration cap, m/s^2.
    pub a_max: f64,
    /// Half-width of the excitation target range, metres; defaults to a
    /// fraction of the visible extent.
    pub span: Option<f64>,
    /// Target offset schedule as [time_s, offset_m] pairs; times snap to
    /// the window grid.
    pub targets: Vec<[f64; 2]>,
}

impl Default for SimBlock {
    fn default() -> Self {
        Self {
            duration: 30.0,
            dt: 0.01,
            h: 0.001,
            seed: 0,
            x0: 0.0,
            v0: 0.0,
            v_max: 0.45,
            a_max: 2.0,
            span: None,
            targets: Vec::new(),
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn resolve(&self) -> Result<SimSetup> {
        SimSetup::from_config(self)
    }
}

/// Fully validated run setup with derived clocks, kernels, and schedule.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub pattern: ScenePattern,
    pub intr: CameraIntrinsics,
    pub dvs: DvsConfig,
    pub plant: PlantParams,
    pub controller: ControllerParams,
    pub quad_kernel: Option<Kernel>,
    pub lin_kernel: Option<Kernel>,
    pub feedback: FeedbackKind,
    pub latency_windows: u32,
    pub dt_us: i64,
    pub h_us: i64,
    pub substeps: i64,
    pub duration: f64,
    pub n_windows: usize,
    pub seed: u64,
    pub x0: f64,
    pub v0: f64,
    pub envelope: MotionEnvelope,
    pub span: f64,
    pub targets: OffsetSchedule,
}

fn seconds_to_us(name: &'static str, value: f64) -> Result<i64> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::Config(format!("sim.{name}: got {value}, need finite positive")));
    }
    let us = (value * 1e6).round();
    if us < 1.0 || (value * 1e6 - us).abs() > 1e-3 {
        return Err(Error::Config(format!(
            "sim.{name}: {value} s is not a whole number of microseconds"
        )));
    }
    Ok(us as i64)
}

impl SimSetup {
    pub fn from_config(cfg: &ConfigFile) -> Result<Self> {
        let cam = &cfg.camera;
        if cam.width == 0 || cam.height == 0 {
            return Err(Error::Config(format!(
                "camera: sensor extent {}x{} must be nonzero",
                cam.width, cam.height
            )));
        }
        let o_x = cam.o_x.unwrap_or((cam.width - 1) as f64 / 2.0);
        let o_y = cam.o_y.unwrap_or((cam.height - 1) as f64 / 2.0);
        let intr = CameraIntrinsics::new(cam.f_x, cam.f_y, o_x, o_y, cam.width, cam.height, cam.z)?;

        let split_row = cfg.scene.split_row.unwrap_or(cam.height / 2);
        let mut pattern = match cfg.scene.kind {
            SceneKind::DualSplit => ScenePattern::dual_split(cfg.scene.sigma, cfg.scene.k, split_row),
            SceneKind::Quadratic => {
                ScenePattern::uniform(Profile::Quadratic { sigma: cfg.scene.sigma })
            }
            SceneKind::Linear => ScenePattern::uniform(Profile::Linear { k: cfg.scene.k }),
        };
        pattern.validate(&intr)?;

        let plant = PlantParams {
            forward: DirectionParams {
                p1: cfg.plant.forward[0],
                p2: cfg.plant.forward[1],
                p3: cfg.plant.forward[2],
            },
            backward: DirectionParams {
                p1: cfg.plant.backward[0],
                p2: cfg.plant.backward[1],
                p3: cfg.plant.backward[2],
            },
            beta: cfg.plant.beta,
            u_min: cfg.plant.u_min,
            u_max: cfg.plant.u_max,
        };
        plant.validate()?;

        let controller =
            ControllerParams::new(cfg.controller.a, cfg.controller.omega, cfg.controller.gain)?;

        let est = &cfg.estimator;
        let dvs = DvsConfig {
            contrast: est.contrast,
            mode: match est.mode {
                SensorMode::Latched => DvsMode::Latched,
                SensorMode::Fractional => DvsMode::IdealFractional,
            },
            seed: cfg.sim.seed,
            threshold_jitter: est.threshold_jitter,
        };
        dvs.validate()?;

        let quad_kernel =
            resolve_kernel(KernelRole::Quadratic, est.quad_kernel, &pattern, &intr)?;
        let lin_kernel = resolve_kernel(KernelRole::Linear, est.lin_kernel, &pattern, &intr)?;
        if quad_kernel.is_none() && lin_kernel.is_none() {
            return Err(Error::Config("no counting kernel fits the scene".into()));
        }
        if !(1..=100).contains(&est.latency_windows) {
            return Err(Error::Config(format!(
                "estimator.latency_windows: got {}, need 1..=100",
                est.latency_windows
            )));
        }

        let sim = &cfg.sim;
        let dt_us = seconds_to_us("dt", sim.dt)?;
        let h_us = seconds_to_us("h", sim.h)?;
        if dt_us % h_us != 0 {
            return Err(Error::Config(format!(
                "sim.h: window dt = {} us is not a whole number of steps of h = {} us",
                dt_us, h_us
            )));
        }
        if h_us * 10 > dt_us {
            return Err(Error::Config(format!(
                "sim.h: need at least 10 integrator steps per window, got {}",
                dt_us / h_us
            )));
        }
        if !sim.duration.is_finite() || sim.duration <= 0.0 {
            return Err(Error::Config(format!(
                "sim.duration: got {}, need finite positive",
                sim.duration
            )));
        }
        let n_windows = (sim.duration / (dt_us as f64 * 1e-6)).round() as usize;
        if n_windows == 0 {
            return Err(Error::Config("sim.duration: shorter than one window".into()));
        }

        let envelope = MotionEnvelope::new(sim.v_max, sim.a_max)?;
        if sim.v_max <= 0.0 || sim.a_max <= 0.0 {
            return Err(Error::Config("sim: v_max and a_max must be positive".into()));
        }
        let half_extent = intr.half_extent_m();
        let span = sim.span.unwrap_or(0.4 * half_extent);
        if !(span > 0.0 && span < half_extent) {
            return Err(Error::Config(format!(
                "sim.span: got {span}, need within (0, {half_extent})"
            )));
        }
        if !sim.x0.is_finite() || sim.x0.abs() > half_extent || !sim.v0.is_finite() {
            return Err(Error::Config(format!(
                "sim: initial state ({}, {}) outside the visible extent",
                sim.x0, sim.v0
            )));
        }

        let dt_s = dt_us as f64 * 1e-6;
        let mut steps = Vec::with_capacity(sim.targets.len());
        for pair in &sim.targets {
            let snapped = (pair[0] / dt_s).round() * dt_s;
            if pair[1].abs() >= half_extent {
                return Err(Error::Config(format!(
                    "sim.targets: offset {} outside the visible extent",
                    pair[1]
                )));
            }
            steps.push((snapped, pair[1]));
        }
        let targets = OffsetSchedule::new(steps)
            .map_err(|e| Error::Config(format!("sim.targets: {e}")))?;
        pattern = pattern.with_offsets(targets.clone());

        Ok(Self {
            pattern,
            intr,
            dvs,
            plant,
            controller,
            quad_kernel,
            lin_kernel,
            feedback: est.feedback,
            latency_windows: est.latency_windows,
            dt_us,
            h_us,
            substeps: dt_us / h_us,
            duration: n_windows as f64 * dt_s,
            n_windows,
            seed: sim.seed,
            x0: sim.x0,
            v0: sim.v0,
            envelope,
            span,
            targets,
        })
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_us as f64 * 1e-6
    }

    pub fn h_s(&self) -> f64 {
        self.h_us as f64 * 1e-6
    }

    /// Both kernel rectangles that exist, for sensor construction.
    pub fn kernel_rects(&self) -> Vec<PixelRect> {
        self.quad_kernel
            .iter()
            .chain(self.lin_kernel.iter())
            .map(|k| k.rect())
            .collect()
    }

    /// Windows per orbit period, rounded; at least one.
    pub fn windows_per_period(&self) -> usize {
        ((self.controller.period() / self.dt_s()).round() as usize).max(1)
    }
}

/// Build a kernel from an explicit rectangle, or derive a centered default
/// inside the matching band. Returns `Ok(None)` when the scene has no band
/// for the role and no rectangle was requested.
fn resolve_kernel(
    role: KernelRole,
    explicit: Option<[u32; 4]>,
    pattern: &ScenePattern,
    intr: &CameraIntrinsics,
) -> Result<Option<Kernel>> {
    if let Some([u_min, u_max, v_min, v_max]) = explicit {
        if u_min > u_max || v_min > v_max {
            return Err(Error::Config(format!(
                "estimator kernel [{u_min}, {u_max}, {v_min}, {v_max}]: empty rectangle"
            )));
        }
        let rect = PixelRect { u_min, u_max, v_min, v_max };
        return Kernel::new(role, rect, pattern, intr).map(Some);
    }
    let quadratic = role == KernelRole::Quadratic;
    let Some((band_lo, band_hi)) = pattern.band_rows(quadratic, intr) else {
        return Ok(None);
    };
    // Horizontal: widest centered span up to 200 columns. The principal
    // point must sit on a half-integer grid for a symmetric span to exist.
    let two_ox = 2.0 * intr.o_x;
    if (two_ox - two_ox.round()).abs() > 1e-9 {
        return Err(Error::Config(
            "estimator: default kernels need 2 * o_x integral; set kernels explicitly".into(),
        ));
    }
    let span_limit = {
        let left = intr.o_x + 0.5;
        let right = intr.width as f64 - 0.5 - intr.o_x;
        left.min(right).floor().max(1.0) as u32
    };
    let half = span_limit.min(100);
    let u_min = (intr.o_x + 0.5 - half as f64).round() as u32;
    let u_max = (intr.o_x - 0.5 + half as f64).round() as u32;
    // Vertical: centered in the band, up to 100 rows.
    let band_h = band_hi - band_lo + 1;
    let n_v = band_h.min(100);
    let v_min = band_lo + (band_h - n_v) / 2;
    let rect = PixelRect { u_min, u_max, v_min, v_max: v_min + n_v - 1 };
    Kernel::new(role, rect, pattern, intr).map(Some)
}
