//! Randomized smooth excitation for open-loop runs.
//!
//! The camera is driven kinematically through back-and-forth segments: each
//! segment picks a fresh target inside the central span and a peak speed,
//! then follows a squared-sine velocity pulse, which starts and ends at
//! rest with zero acceleration. Peak speed is capped so the acceleration
//! limit holds exactly; position, velocity, and acceleration all have
//! closed forms, so ground truth carries no integration error.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Segment {
    t_start: f64,
    duration: f64,
    x_start: f64,
    /// Signed displacement over the segment.
    delta: f64,
    /// Unsigned peak speed.
    v_peak: f64,
}

impl Segment {
    /// State at `tau` seconds into the segment.
    fn state(&self, tau: f64) -> (f64, f64, f64) {
        let tau = tau.clamp(0.0, self.duration);
        let sign = self.delta.signum();
        let phase = 2.0 * PI * tau / self.duration;
        let x = self.x_start
            + sign * self.v_peak / 2.0 * (tau - self.duration / (2.0 * PI) * phase.sin());
        let v = sign * self.v_peak * (PI * tau / self.duration).sin().powi(2);
        let a = sign * self.v_peak * PI / self.duration * phase.sin();
        (x, v, a)
    }
}

/// A pre-planned excitation trajectory; beyond its end the camera holds the
/// final position.
#[derive(Debug, Clone)]
pub struct ExcitationPlan {
    segments: Vec<Segment>,
    end_t: f64,
    end_x: f64,
}

impl ExcitationPlan {
    /// Draw segments until `duration` is covered. Targets are uniform over
    /// `[-span, span]` (re-drawn when too close to the current position),
    /// peak speeds uniform over `[0.3 v_max, v_max]` and capped to respect
    /// `a_max`.
    pub fn randomized(
        x_start: f64,
        span: f64,
        v_max: f64,
        a_max: f64,
        duration: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if !(span > 0.0 && v_max > 0.0 && a_max > 0.0 && duration > 0.0) {
            return Err(Error::InvalidParameter {
                name: "excitation",
                reason: format!(
                    "span {span}, v_max {v_max}, a_max {a_max}, duration {duration} must be positive"
                ),
            });
        }
        if x_start.abs() > span {
            return Err(Error::InvalidParameter {
                name: "excitation start",
                reason: format!("{x_start} outside span {span}"),
            });
        }
        let min_hop = 0.2 * span;
        let mut segments = Vec::new();
        let mut x = x_start;
        let mut t = 0.0;
        while t < duration {
            let mut target = rng.gen_range(-span..span);
            let mut tries = 0;
            while (target - x).abs() < min_hop && tries < 16 {
                target = rng.gen_range(-span..span);
                tries += 1;
            }
            if (target - x).abs() < min_hop {
                target = (if x > 0.0 { x - 0.5 * span } else { x + 0.5 * span })
                    .clamp(-span, span);
            }
            let delta = target - x;
            let drawn = rng.gen_range(0.3 * v_max..v_max);
            let v_peak = drawn.min((2.0 * a_max * delta.abs() / PI).sqrt());
            let dur = 2.0 * delta.abs() / v_peak;
            segments.push(Segment { t_start: t, duration: dur, x_start: x, delta, v_peak });
            x = target;
            t += dur;
        }
        Ok(Self { segments, end_t: t, end_x: x })
    }

    /// Ground-truth `(x, x_dot, x_ddot)` at time `t`.
    pub fn state_at(&self, t: f64) -> (f64, f64, f64) {
        if t >= self.end_t || self.segments.is_empty() {
            return (self.end_x, 0.0, 0.0);
        }
        let idx = self
            .segments
            .partition_point(|s| s.t_start <= t)
            .saturating_sub(1);
        let seg = &self.segments[idx];
        seg.state(t - seg.t_start)
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    pub fn duration(&self) -> f64 {
        self.end_t
    }

    /// Extreme positions visited, for spatial-suprema evaluation. Segment
    /// motion is monotone, so the endpoints suffice.
    pub fn position_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.segments {
            for x in [s.x_start, s.x_start + s.delta] {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if self.segments.is_empty() {
            (self.end_x, self.end_x)
        } else {
            (lo, hi)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn plan(seed: u64) -> ExcitationPlan {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ExcitationPlan::randomized(0.0, 0.2, 0.45, 2.0, 20.0, &mut rng).unwrap()
    }

    #[test]
    fn envelope_is_respected_everywhere() {
        let p = plan(3);
        assert!(p.segment_count() >= 10);
        let mut t = 0.0;
        while t < p.duration() + 1.0 {
            let (x, v, a) = p.state_at(t);
            assert!(x.abs() <= 0.2 + 1e-12);
            assert!(v.abs() <= 0.45 + 1e-12, "v = {v} at t = {t}");
            assert!(a.abs() <= 2.0 + 1e-9, "a = {a} at t = {t}");
            t += 0.0007;
        }
        let (lo, hi) = p.position_range();
        assert!(lo >= -0.2 - 1e-12 && hi <= 0.2 + 1e-12);
    }

    #[test]
    fn closed_forms_match_finite_differences() {
        let p = plan(11);
        let d = 1e-6;
        for i in 1..300 {
            let t = 0.05 * i as f64;
            let (_, v, a) = p.state_at(t);
            let (xm, vm, _) = p.state_at(t - d);
            let (xp, vp, _) = p.state_at(t + d);
            assert_abs_diff_eq!((xp - xm) / (2.0 * d), v, epsilon = 1e-5);
            assert_abs_diff_eq!((vp - vm) / (2.0 * d), a, epsilon = 1e-4);
        }
    }

    #[test]
    fn segments_join_at_rest() {
        let p = plan(5);
        for s in &p.segments {
            let (x0, v0, a0) = s.state(0.0);
            assert_abs_diff_eq!(x0, s.x_start, epsilon = 1e-12);
            assert_abs_diff_eq!(v0, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(a0, 0.0, epsilon = 1e-9);
            let (x1, v1, a1) = s.state(s.duration);
            assert_abs_diff_eq!(x1, s.x_start + s.delta, epsilon = 1e-12);
            assert_abs_diff_eq!(v1, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(a1, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn same_seed_reproduces_the_plan() {
        let a = plan(42);
        let b = plan(42);
        assert_eq!(a.segment_count(), b.segment_count());
        for t in [0.1, 1.7, 9.3, 19.9] {
            assert_eq!(a.state_at(t), b.state_at(t));
        }
        let c = plan(43);
        assert!(a.state_at(5.0) != c.state_at(5.0));
    }

    #[test]
    fn peak_speed_is_reached_mid_segment() {
        let p = plan(9);
        let s = &p.segments[0];
        let (_, v, _) = s.state(0.5 * s.duration);
        assert_abs_diff_eq!(v.abs(), s.v_peak, epsilon = 1e-12);
    }
}
