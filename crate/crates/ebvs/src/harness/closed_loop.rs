//! Closed-loop runs: the limit-cycle controller driven by windowed event
//! counts (or exact state, for ablation) actuating the identified plant.
//!
//! Control is zero-order-hold per window. The feedback term commanded in
//! window `w` comes from counts measured `latency_windows` earlier; until
//! those exist the controller substitutes the on-orbit values, which is
//! what the feedback would read if the camera were already tracking.

use crate::dvs::{canonical_sort, DvsMode, DvsSim, Event, PixelRect};
use crate::error::{Error, Result};
use crate::estimator::{FeedbackSynthesizer, Kernel};
use crate::harness::config::{FeedbackKind, SimSetup};
use crate::plant::{step_rk4, RobotState};
use crate::scene::OffsetSchedule;

/// One row of the logged trajectory, sampled at a window start. The counts
/// are the ones measured during this window; `u_cmd` was computed from the
/// delayed counts available when the window began.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub x: f64,
    pub x_dot: f64,
    /// Estimated pattern-relative position times velocity.
    pub est_xv: f64,
    /// Estimated velocity.
    pub est_v: f64,
    /// Feedback term handed to the controller.
    pub fb: f64,
    /// Clamped control input held through the window.
    pub u_cmd: f64,
    pub n_quad: f64,
    pub n_lin: f64,
    /// World-frame reference position: active target plus orbit.
    pub x_ref: f64,
    pub v_ref: f64,
}

/// Trailing statistics of a finished run.
#[derive(Debug, Clone, Copy)]
pub struct ClosedLoopSummary {
    /// Mean phase-space radius over the last two orbit periods.
    pub final_amplitude: f64,
    /// |final_amplitude - a| / a.
    pub amplitude_error: f64,
    /// First time after which every rolling one-period mean radius stays
    /// within 15 percent of the commanded amplitude; `None` if never.
    pub convergence_time: Option<f64>,
    /// Mean pattern-relative position over the last two periods; near zero
    /// when the camera actually centers on the pattern.
    pub trailing_mean_position: f64,
    pub saturated_windows: usize,
}

#[derive(Debug, Clone)]
pub struct ClosedLoopResult {
    pub records: Vec<TrajectoryRecord>,
    pub events: Vec<Event>,
    pub summary: ClosedLoopSummary,
}

fn tally(events: &[Event], rect: &PixelRect) -> f64 {
    let mut n = 0i64;
    for e in events {
        if rect.contains(e.u as u32, e.v as u32) {
            n += e.p as i64;
        }
    }
    n as f64
}

/// Run the loop for the configured horizon. `record_events` keeps the full
/// event stream (latched mode only; fractional streams carry no events).
pub fn run_closed_loop(setup: &SimSetup, record_events: bool) -> Result<ClosedLoopResult> {
    let ctrl = &setup.controller;
    let needs_counts = setup.feedback == FeedbackKind::Events;
    let (quad, lin) = match (&setup.quad_kernel, &setup.lin_kernel) {
        (Some(q), Some(l)) => (Some(q), Some(l)),
        _ if needs_counts => {
            return Err(Error::Config(
                "event feedback needs both a quadratic and a linear kernel".into(),
            ))
        }
        (q, l) => (q.as_ref(), l.as_ref()),
    };
    let synth = match (quad, lin) {
        (Some(q), Some(l)) => Some(FeedbackSynthesizer::new(
            q.lumped(&setup.pattern, &setup.intr, setup.dvs.contrast, setup.dt_s()),
            l.lumped(&setup.pattern, &setup.intr, setup.dvs.contrast, setup.dt_s()),
        )?),
        _ => None,
    };
    let mut sensor = if quad.is_some() || lin.is_some() {
        let mut sim = DvsSim::new(
            setup.pattern.clone(),
            setup.intr.clone(),
            setup.dvs,
            &setup.kernel_rects(),
        )?;
        sim.reset(setup.x0, 0);
        Some(sim)
    } else {
        None
    };
    let fractional = setup.dvs.mode == DvsMode::IdealFractional;
    let quad_rect = quad.map(Kernel::rect);
    let lin_rect = lin.map(Kernel::rect);
    let half_extent = setup.intr.half_extent_m();
    let latency = setup.latency_windows as usize;

    let mut state = RobotState { x: setup.x0, x_dot: setup.v0, t: 0.0 };
    let mut counts: Vec<(f64, f64)> = Vec::with_capacity(setup.n_windows);
    let mut records: Vec<TrajectoryRecord> = Vec::with_capacity(setup.n_windows);
    let mut events = Vec::new();
    let mut saturated = 0usize;

    for w in 0..setup.n_windows {
        let t0_us = w as i64 * setup.dt_us;
        let t0 = t0_us as f64 * 1e-6;
        let offset = setup.targets.offset_at(t0);
        let (fb, est_v, est_xv) = match setup.feedback {
            FeedbackKind::Perfect => {
                let rel = state.x - offset;
                (rel * state.x_dot * state.x_dot, state.x_dot, rel * state.x_dot)
            }
            FeedbackKind::Events => {
                if w >= latency {
                    let (nq, nl) = counts[w - latency];
                    let synth = synth.as_ref().expect("kernels checked above");
                    let est_xv = synth.product_xv(nq);
                    let est_v = synth.velocity(nl);
                    (est_xv * est_v, est_v, est_xv)
                } else {
                    let r = ctrl.reference(t0);
                    (ctrl.orbit_feedback(t0), r.x_dot, r.x * r.x_dot)
                }
            }
        };
        let eff = setup.plant.blended(est_v);
        let u_raw = ctrl.control_input(eff, t0, fb);
        let u = setup.plant.clamp_input(u_raw);
        if u != u_raw {
            saturated += 1;
        }
        let r = ctrl.reference(t0);
        records.push(TrajectoryRecord {
            t: t0,
            x: state.x,
            x_dot: state.x_dot,
            est_xv,
            est_v,
            fb,
            u_cmd: u,
            n_quad: 0.0,
            n_lin: 0.0,
            x_ref: offset + r.x,
            v_ref: r.x_dot,
        });

        if fractional {
            if let Some(sim) = &mut sensor {
                sim.reset(state.x, t0_us);
            }
        }
        let mut window_events = Vec::new();
        for j in 0..setup.substeps {
            let stamp = t0_us + j * setup.h_us;
            state = step_rk4(state, u, &setup.plant, setup.h_s());
            if let Some(sim) = &mut sensor {
                window_events.extend(sim.step(state.x, stamp)?);
            }
        }
        let (nq, nl) = if fractional {
            let sim = sensor.as_ref().expect("fractional implies a sensor");
            (
                quad_rect.map_or(0.0, |rc| sim.fraction_in(&rc)),
                lin_rect.map_or(0.0, |rc| sim.fraction_in(&rc)),
            )
        } else {
            (
                quad_rect.map_or(0.0, |rc| tally(&window_events, &rc)),
                lin_rect.map_or(0.0, |rc| tally(&window_events, &rc)),
            )
        };
        counts.push((nq, nl));
        let rec = records.last_mut().expect("pushed above");
        rec.n_quad = nq;
        rec.n_lin = nl;
        if record_events {
            events.append(&mut window_events);
        }

        let t_end = (t0_us + setup.dt_us) as f64 * 1e-6;
        let rel_end = state.x - setup.targets.offset_at(t_end);
        if rel_end.abs() > half_extent || !state.x_dot.is_finite() {
            return Err(Error::Diverged { t: t_end, x: rel_end, extent: half_extent });
        }
    }
    canonical_sort(&mut events);
    let summary = summarize(&records, setup, saturated);
    Ok(ClosedLoopResult { records, events, summary })
}

fn rolling_means(values: &[f64], width: usize) -> Vec<f64> {
    if values.len() < width || width == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(values.len() - width + 1);
    let mut acc: f64 = values[..width].iter().sum();
    out.push(acc / width as f64);
    for i in width..values.len() {
        acc += values[i] - values[i - width];
        out.push(acc / width as f64);
    }
    out
}

fn summarize(records: &[TrajectoryRecord], setup: &SimSetup, saturated: usize) -> ClosedLoopSummary {
    let a = setup.controller.amplitude;
    let omega = setup.controller.omega;
    let radius: Vec<f64> = records
        .iter()
        .map(|r| {
            let rel = r.x - setup.targets.offset_at(r.t);
            (rel * rel + (r.x_dot / omega).powi(2)).sqrt()
        })
        .collect();
    let wpp = setup.windows_per_period();
    let rolling = rolling_means(&radius, wpp);
    let band = 0.15 * a;
    let converged_from = rolling
        .iter()
        .rposition(|r| (r - a).abs() > band)
        .map_or(Some(0), |last_out| {
            if last_out + 1 < rolling.len() {
                Some(last_out + 1)
            } else {
                None
            }
        });
    let convergence_time = converged_from.map(|w| records[w].t);
    let trailing = (2 * wpp).min(records.len());
    let final_amplitude =
        radius[radius.len() - trailing..].iter().sum::<f64>() / trailing as f64;
    let trailing_mean_position = records[records.len() - trailing..]
        .iter()
        .map(|r| r.x - setup.targets.offset_at(r.t))
        .sum::<f64>()
        / trailing as f64;
    ClosedLoopSummary {
        final_amplitude,
        amplitude_error: (final_amplitude - a).abs() / a,
        convergence_time,
        trailing_mean_position,
        saturated_windows: saturated,
    }
}

/// Mean world position over the last `trailing` records before each offset
/// switch (and before the end of the run), paired with the offset active in
/// that phase. Phases shorter than `trailing` are skipped.
pub fn phase_trailing_means(
    records: &[TrajectoryRecord],
    schedule: &OffsetSchedule,
    trailing: usize,
) -> Vec<(f64, f64)> {
    if records.is_empty() || trailing == 0 {
        return Vec::new();
    }
    let end_t = records.last().expect("nonempty").t + f64::EPSILON;
    let mut boundaries: Vec<f64> = schedule.steps().iter().map(|&(t, _)| t).collect();
    boundaries.push(end_t + 1.0);
    let mut phases = Vec::new();
    let mut start = 0.0;
    for &b in &boundaries {
        if b > start {
            phases.push((start, b));
            start = b;
        }
    }
    let mut out = Vec::new();
    for (lo, hi) in phases {
        let phase: Vec<&TrajectoryRecord> =
            records.iter().filter(|r| r.t >= lo && r.t < hi).collect();
        if phase.len() < trailing {
            continue;
        }
        let mean = phase[phase.len() - trailing..]
            .iter()
            .map(|r| r.x)
            .sum::<f64>()
            / trailing as f64;
        out.push((schedule.offset_at(lo), mean));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ControllerParams;
    use crate::harness::config::ConfigFile;
    use approx::assert_abs_diff_eq;

    fn setup(text: &str) -> SimSetup {
        ConfigFile::parse(text).unwrap().resolve().unwrap()
    }

    const BASE: &str = r#"
[scene]
kind = "dual_split"

[controller]
a = 0.18
omega = 4.18879
gain = 1.5

[estimator]
mode = "fractional"

[sim]
duration = 12.0
dt = 0.01
h = 0.001
x0 = 0.1
"#;

    #[test]
    fn event_feedback_converges_to_the_commanded_orbit() {
        let s = setup(BASE);
        let out = run_closed_loop(&s, false).unwrap();
        assert_eq!(out.records.len(), 1200);
        let sm = &out.summary;
        assert!(
            sm.amplitude_error < 0.15,
            "amplitude {} vs commanded 0.18",
            sm.final_amplitude
        );
        let tc = sm.convergence_time.expect("should converge");
        assert!(tc < 10.0, "converged only at {tc}");
        assert!(sm.trailing_mean_position.abs() < 0.05);
    }

    #[test]
    fn perfect_feedback_matches_event_feedback_closely() {
        let s = setup(BASE);
        let events = run_closed_loop(&s, false).unwrap();
        let mut ablated = s.clone();
        ablated.feedback = FeedbackKind::Perfect;
        let perfect = run_closed_loop(&ablated, false).unwrap();
        let d = (events.summary.final_amplitude - perfect.summary.final_amplitude).abs();
        assert!(d / 0.18 < 0.02, "amplitude gap {d}");
    }

    #[test]
    fn records_log_window_start_references() {
        let s = setup(BASE);
        let out = run_closed_loop(&s, false).unwrap();
        let r = &out.records[700];
        assert_abs_diff_eq!(r.t, 7.0, epsilon = 1e-9);
        let rf = s.controller.reference(7.0);
        assert_abs_diff_eq!(r.x_ref, rf.x, epsilon = 1e-12);
        assert_abs_diff_eq!(r.v_ref, rf.x_dot, epsilon = 1e-12);
        assert!(out.events.is_empty(), "fractional mode has no events");
    }

    #[test]
    fn unity_gain_run_is_reproducible() {
        let s = setup(BASE);
        let a = run_closed_loop(&s, false).unwrap();
        let b = run_closed_loop(&s, false).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.x.to_bits(), rb.x.to_bits());
            assert_eq!(ra.u_cmd.to_bits(), rb.u_cmd.to_bits());
        }
    }

    // The slow error mode decays at roughly delta * omega^2 / (2 p1), a
    // six-second time constant at these gains, so target-offset checks
    // start on the orbit (v0 = a * omega) and leave tens of seconds to
    // settle.
    const ON_ORBIT: &str = r#"
[scene]
kind = "dual_split"

[controller]
a = 0.18
omega = 4.18879
gain = 1.5

[estimator]
mode = "fractional"

[sim]
duration = 30.0
dt = 0.01
h = 0.001
v0 = 0.7539822368615504
"#;

    #[test]
    fn zero_gain_leaves_the_pattern_offset_uncorrected() {
        let with_target = format!("{ON_ORBIT}targets = [[3.0, 0.1]]");
        let s = setup(&with_target);
        let good = run_closed_loop(&s, false).unwrap();
        assert!(
            good.summary.trailing_mean_position.abs() < 0.05,
            "gain 1.5 should recentre, got {}",
            good.summary.trailing_mean_position
        );
        let mut ungained = s.clone();
        ungained.controller = ControllerParams::new(0.18, 4.18879, 0.0).unwrap();
        let bad = run_closed_loop(&ungained, false).unwrap();
        assert!(
            bad.summary.trailing_mean_position.abs() > 0.05,
            "zero gain should leave an offset, got {}",
            bad.summary.trailing_mean_position
        );
    }

    #[test]
    fn divergence_is_reported_not_panicked() {
        let mut s = setup(BASE);
        // An absurd orbit amplitude pushes the camera off the pattern.
        s.controller = ControllerParams::new(2.5, 4.18879, 1.5).unwrap();
        match run_closed_loop(&s, false) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn phase_means_follow_the_targets() {
        let with_target = format!("{ON_ORBIT}targets = [[5.0, 0.08]]");
        let s = setup(&with_target);
        let out = run_closed_loop(&s, false).unwrap();
        let means = phase_trailing_means(&out.records, &s.targets, 2 * s.windows_per_period());
        assert_eq!(means.len(), 2);
        assert_abs_diff_eq!(means[0].0, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(means[1].0, 0.08, epsilon = 1e-12);
        assert!(means[0].1.abs() < 0.04, "phase 0 mean {}", means[0].1);
        assert!((means[1].1 - 0.08).abs() < 0.04, "phase 1 mean {}", means[1].1);
    }
}
