//! Structured intensity scenes observed by a horizontally translating camera.
//!
//! A scene is a static log-intensity pattern whose value depends only on the
//! horizontal image coordinate, viewed by a pinhole camera at fixed depth `z`
//! that translates along the world x axis. Translating the camera by `x`
//! shifts the observed image horizontally by `-(f_x / z) * x` pixels, so the
//! log intensity seen at a pixel is the static profile evaluated at a shifted
//! coordinate. Horizontal coordinates are measured relative to the principal
//! point; the profile origin coincides with the principal point when the
//! camera sits at the pattern's world offset.

use crate::error::{Error, Result};

/// Pinhole intrinsics plus the fixed depth of the scene plane.
#[derive(Debug, Clone, Copy)]
pub struct CameraIntrinsics {
    /// Horizontal focal length, pixels.
    pub f_x: f64,
    /// Vertical focal length, pixels.
    pub f_y: f64,
    /// Principal point column.
    pub o_x: f64,
    /// Principal point row.
    pub o_y: f64,
    /// Sensor width, pixels.
    pub width: u32,
    /// Sensor height, pixels.
    pub height: u32,
    /// Distance from the optical center to the scene plane, metres.
    pub z: f64,
}

impl CameraIntrinsics {
    pub fn new(
        f_x: f64,
        f_y: f64,
        o_x: f64,
        o_y: f64,
        width: u32,
        height: u32,
        z: f64,
    ) -> Result<Self> {
        let intr = Self { f_x, f_y, o_x, o_y, width, height, z };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, value: f64, ok: bool| -> Result<()> {
            if !value.is_finite() || !ok {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("got {value}"),
                });
            }
            Ok(())
        };
        check("f_x", self.f_x, self.f_x > 0.0)?;
        check("f_y", self.f_y, self.f_y > 0.0)?;
        check("z", self.z, self.z > 0.0)?;
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter {
                name: "sensor extent",
                reason: format!("{}x{}", self.width, self.height),
            });
        }
        check("o_x", self.o_x, self.o_x >= 0.0 && self.o_x < self.width as f64)?;
        check("o_y", self.o_y, self.o_y >= 0.0 && self.o_y < self.height as f64)?;
        Ok(())
    }

    /// Horizontal coordinate of a pixel column relative to the principal point.
    pub fn centered_u(&self, col: u32) -> f64 {
        col as f64 - self.o_x
    }

    /// Horizontal image shift, in pixels, induced by camera position `x`.
    pub fn pixel_shift(&self, x: f64) -> f64 {
        -(self.f_x / self.z) * x
    }

    /// True when the centered coordinate `u` and row `v` fall on the sensor.
    pub fn contains(&self, u: f64, v: u32) -> bool {
        let col = u + self.o_x;
        col >= 0.0 && col < self.width as f64 && v < self.height
    }

    /// Half of the horizontal world span visible to the sensor, metres.
    pub fn half_extent_m(&self) -> f64 {
        (self.width as f64 / 2.0) * self.z / self.f_x
    }
}

/// Horizontal log-intensity sub-profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `f(u) = k * u`
    Linear { k: f64 },
    /// `f(u) = -u^2 / (2 * sigma^2)`
    Quadratic { sigma: f64 },
}

impl Profile {
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Profile::Linear { k } => k * u,
            Profile::Quadratic { sigma } => -u * u / (2.0 * sigma * sigma),
        }
    }

    /// Spatial derivative of order 1, 2, or 3 at coordinate `u`.
    pub fn derivative(&self, u: f64, order: u32) -> Result<f64> {
        let d = match (*self, order) {
            (Profile::Linear { k }, 1) => k,
            (Profile::Linear { .. }, 2 | 3) => 0.0,
            (Profile::Quadratic { sigma }, 1) => -u / (sigma * sigma),
            (Profile::Quadratic { sigma }, 2) => -1.0 / (sigma * sigma),
            (Profile::Quadratic { .. }, 3) => 0.0,
            _ => {
                return Err(Error::InvalidParameter {
                    name: "derivative order",
                    reason: format!("got {order}, supported 1..=3"),
                })
            }
        };
        Ok(d)
    }

    /// Suprema of |f'|, |f''|, |f'''| over the coordinate interval `[lo, hi]`.
    pub fn suprema(&self, lo: f64, hi: f64) -> DerivativeSuprema {
        match *self {
            Profile::Linear { k } => DerivativeSuprema { f1: k.abs(), f2: 0.0, f3: 0.0 },
            Profile::Quadratic { sigma } => {
                let s2 = sigma * sigma;
                let extreme = lo.abs().max(hi.abs());
                DerivativeSuprema { f1: extreme / s2, f2: 1.0 / s2, f3: 0.0 }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Profile::Linear { k } if k.is_finite() && k != 0.0 => Ok(()),
            Profile::Linear { k } => Err(Error::InvalidParameter {
                name: "k",
                reason: format!("got {k}, need finite nonzero"),
            }),
            Profile::Quadratic { sigma } if sigma.is_finite() && sigma > 0.0 => Ok(()),
            Profile::Quadratic { sigma } => Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("got {sigma}, need finite positive"),
            }),
        }
    }
}

/// Suprema of the first three spatial derivative magnitudes over an observed
/// coordinate interval. Feeds the count-error bound constants.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeSuprema {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

/// Spatial arrangement of sub-profiles on the display.
#[derive(Debug, Clone)]
pub enum PatternLayout {
    /// One profile over the whole sensor.
    Uniform(Profile),
    /// Quadratic profile on rows above `split_row`, linear on rows at and
    /// below it.
    DualSplit { sigma: f64, k: f64, split_row: u32 },
}

/// Piecewise-constant world-frame horizontal offset of the pattern origin.
///
/// Each entry `(t, offset)` moves the pattern origin to `offset` metres at
/// time `t`; the offset before the first entry is zero.
#[derive(Debug, Clone, Default)]
pub struct OffsetSchedule {
    steps: Vec<(f64, f64)>,
}

impl OffsetSchedule {
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        for w in steps.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidParameter {
                    name: "offset schedule",
                    reason: format!("times must strictly increase, got {} then {}", w[0].0, w[1].0),
                });
            }
        }
        for &(t, off) in &steps {
            if !t.is_finite() || !off.is_finite() {
                return Err(Error::NonFinite { context: "offset schedule" });
            }
        }
        Ok(Self { steps })
    }

    pub fn offset_at(&self, t: f64) -> f64 {
        let mut current = 0.0;
        for &(step_t, off) in &self.steps {
            if step_t <= t {
                current = off;
            } else {
                break;
            }
        }
        current
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// A displayed pattern: sub-profile layout plus the offset schedule of its
/// origin.
#[derive(Debug, Clone)]
pub struct ScenePattern {
    pub layout: PatternLayout,
    pub offsets: OffsetSchedule,
}

impl ScenePattern {
    pub fn uniform(profile: Profile) -> Self {
        Self { layout: PatternLayout::Uniform(profile), offsets: OffsetSchedule::default() }
    }

    pub fn dual_split(sigma: f64, k: f64, split_row: u32) -> Self {
        Self {
            layout: PatternLayout::DualSplit { sigma, k, split_row },
            offsets: OffsetSchedule::default(),
        }
    }

    pub fn with_offsets(mut self, offsets: OffsetSchedule) -> Self {
        self.offsets = offsets;
        self
    }

    pub fn validate(&self, intr: &CameraIntrinsics) -> Result<()> {
        match self.layout {
            PatternLayout::Uniform(p) => p.validate(),
            PatternLayout::DualSplit { sigma, k, split_row } => {
                Profile::Quadratic { sigma }.validate()?;
                Profile::Linear { k }.validate()?;
                if split_row == 0 || split_row > intr.height - 1 {
                    return Err(Error::InvalidParameter {
                        name: "split_row",
                        reason: format!(
                            "got {split_row}, need 1..={}",
                            intr.height - 1
                        ),
                    });
                }
                Ok(())
            }
        }
    }

    /// Sub-profile governing sensor row `v`.
    pub fn profile_for_row(&self, v: u32) -> Profile {
        match self.layout {
            PatternLayout::Uniform(p) => p,
            PatternLayout::DualSplit { sigma, k, split_row } => {
                if v < split_row {
                    Profile::Quadratic { sigma }
                } else {
                    Profile::Linear { k }
                }
            }
        }
    }

    pub fn quadratic_part(&self) -> Option<Profile> {
        match self.layout {
            PatternLayout::Uniform(p @ Profile::Quadratic { .. }) => Some(p),
            PatternLayout::DualSplit { sigma, .. } => Some(Profile::Quadratic { sigma }),
            _ => None,
        }
    }

    pub fn linear_part(&self) -> Option<Profile> {
        match self.layout {
            PatternLayout::Uniform(p @ Profile::Linear { .. }) => Some(p),
            PatternLayout::DualSplit { k, .. } => Some(Profile::Linear { k }),
            _ => None,
        }
    }

    /// Row range `[lo, hi]` covered by the given profile kind, if present.
    pub fn band_rows(&self, quadratic: bool, intr: &CameraIntrinsics) -> Option<(u32, u32)> {
        match self.layout {
            PatternLayout::Uniform(Profile::Quadratic { .. }) if quadratic => {
                Some((0, intr.height - 1))
            }
            PatternLayout::Uniform(Profile::Linear { .. }) if !quadratic => {
                Some((0, intr.height - 1))
            }
            PatternLayout::DualSplit { split_row, .. } => {
                if quadratic {
                    Some((0, split_row - 1))
                } else {
                    Some((split_row, intr.height - 1))
                }
            }
            _ => None,
        }
    }
}

/// Static log intensity at centered coordinate `u` on row `v`.
///
/// Errors when `(u, v)` falls off the sensor; the shifted-evaluation helpers
/// below stay defined off-sensor because the profiles are global functions.
pub fn log_intensity(
    pattern: &ScenePattern,
    intr: &CameraIntrinsics,
    u: f64,
    v: u32,
) -> Result<f64> {
    if !intr.contains(u, v) {
        return Err(Error::OutOfExtent { u, v, width: intr.width, height: intr.height });
    }
    Ok(pattern.profile_for_row(v).value(u))
}

/// Image shift of the pattern relative to the sensor, in pixels, for camera
/// position `x` at time `t` (accounts for the pattern's offset schedule).
pub fn relative_shift(pattern: &ScenePattern, intr: &CameraIntrinsics, x: f64, t: f64) -> f64 {
    intr.pixel_shift(x) - intr.pixel_shift(pattern.offsets.offset_at(t))
}

/// Log intensity observed at centered coordinate `u`, row `v`, camera
/// position `x`, time `t`.
pub fn intensity_at_time(
    pattern: &ScenePattern,
    intr: &CameraIntrinsics,
    u: f64,
    v: u32,
    x: f64,
    t: f64,
) -> f64 {
    pattern.profile_for_row(v).value(u + relative_shift(pattern, intr, x, t))
}
