//! Open-loop runs: drive the camera along a kinematic plan, collect net
//! event counts per window over the configured kernels, and fit lumped
//! constants from the result.

use crate::dvs::{DvsMode, DvsSim, PixelRect};
use crate::error::{Error, Result};
use crate::estimator::{self, CalibrationSample, CountWindow, Kernel, LumpedConstant};
use crate::harness::config::SimSetup;
use crate::harness::excitation::ExcitationPlan;

/// Per-window ground truth and counts from an open-loop run. Counts are
/// `None` for a kernel the setup does not define.
#[derive(Debug, Clone, Copy)]
pub struct WindowObservation {
    pub window: CountWindow,
    pub n_quad: Option<f64>,
    pub n_lin: Option<f64>,
    pub x_start: f64,
    pub v_start: f64,
    pub x_mid: f64,
    pub v_mid: f64,
}

fn tally(events: &[crate::dvs::Event], rect: &PixelRect) -> f64 {
    let mut n = 0i64;
    for e in events {
        if rect.contains(e.u as u32, e.v as u32) {
            n += e.p as i64;
        }
    }
    n as f64
}

/// Run the sensor along `plan` for the setup's window grid. With `relatch`
/// every window starts from freshly latched references, so each count
/// stands alone; without it the sensor state carries across windows and
/// fractional counts are first differences of the accumulators.
pub fn run_excitation(
    setup: &SimSetup,
    plan: &ExcitationPlan,
    relatch: bool,
) -> Result<Vec<WindowObservation>> {
    let rects = setup.kernel_rects();
    let mut sim = DvsSim::new(setup.pattern.clone(), setup.intr.clone(), setup.dvs, &rects)?;
    let fractional = sim.mode() == DvsMode::IdealFractional;
    let quad_rect = setup.quad_kernel.as_ref().map(Kernel::rect);
    let lin_rect = setup.lin_kernel.as_ref().map(Kernel::rect);

    sim.reset(plan.state_at(0.0).0, 0);
    let mut prev_q = 0.0;
    let mut prev_l = 0.0;
    let mut out = Vec::with_capacity(setup.n_windows);
    for w in 0..setup.n_windows {
        let t0_us = w as i64 * setup.dt_us;
        let (x_start, v_start, _) = plan.state_at(t0_us as f64 * 1e-6);
        if relatch {
            sim.reset(x_start, t0_us);
            prev_q = 0.0;
            prev_l = 0.0;
        }
        let mut events = Vec::new();
        for j in 0..setup.substeps {
            let stamp = t0_us + j * setup.h_us;
            let (x_next, _, _) = plan.state_at((stamp + setup.h_us) as f64 * 1e-6);
            events.extend(sim.step(x_next, stamp)?);
        }
        let (n_quad, n_lin) = if fractional {
            let q = quad_rect.map(|r| {
                let cum = sim.fraction_in(&r);
                let n = cum - prev_q;
                prev_q = cum;
                n
            });
            let l = lin_rect.map(|r| {
                let cum = sim.fraction_in(&r);
                let n = cum - prev_l;
                prev_l = cum;
                n
            });
            (q, l)
        } else {
            (
                quad_rect.map(|r| tally(&events, &r)),
                lin_rect.map(|r| tally(&events, &r)),
            )
        };
        let t_mid = (t0_us as f64 + 0.5 * setup.dt_us as f64) * 1e-6;
        let (x_mid, v_mid, _) = plan.state_at(t_mid);
        out.push(WindowObservation {
            window: CountWindow { start_us: t0_us, len_us: setup.dt_us },
            n_quad,
            n_lin,
            x_start,
            v_start,
            x_mid,
            v_mid,
        });
    }
    Ok(out)
}

/// Fitted lumped constant for one kernel, next to its analytic value.
#[derive(Debug, Clone, Copy)]
pub struct KernelFit {
    pub fit: LumpedConstant,
    pub analytic: f64,
    pub n_samples: usize,
}

impl KernelFit {
    /// |fitted - analytic| / |analytic|.
    pub fn relative_error(&self) -> f64 {
        (self.fit.value - self.analytic).abs() / self.analytic.abs()
    }
}

/// Calibration result for whichever kernels the setup defines.
#[derive(Debug, Clone, Copy, Default)]
pub struct CalibrationOutcome {
    pub quad: Option<KernelFit>,
    pub lin: Option<KernelFit>,
}

/// Least-squares lumped constants from windowed observations. The state
/// regressor uses mid-window ground truth: pattern-relative position times
/// velocity for the quadratic kernel, velocity alone for the linear one.
pub fn calibrate_from_observations(
    setup: &SimSetup,
    observations: &[WindowObservation],
) -> Result<CalibrationOutcome> {
    let dt = setup.dt_s();
    let mut outcome = CalibrationOutcome::default();
    if let Some(kernel) = &setup.quad_kernel {
        let samples: Vec<CalibrationSample> = observations
            .iter()
            .filter_map(|o| {
                let count = o.n_quad?;
                let t_mid = o.window.midpoint_s();
                let off = setup.targets.offset_at(t_mid);
                Some(CalibrationSample { count, state: (o.x_mid - off) * o.v_mid })
            })
            .collect();
        let fit = estimator::calibrate(&samples)?;
        let analytic = kernel.lumped(&setup.pattern, &setup.intr, setup.dvs.contrast, dt);
        outcome.quad = Some(KernelFit { fit, analytic, n_samples: samples.len() });
    }
    if let Some(kernel) = &setup.lin_kernel {
        let samples: Vec<CalibrationSample> = observations
            .iter()
            .filter_map(|o| {
                let count = o.n_lin?;
                Some(CalibrationSample { count, state: o.v_mid })
            })
            .collect();
        let fit = estimator::calibrate(&samples)?;
        let analytic = kernel.lumped(&setup.pattern, &setup.intr, setup.dvs.contrast, dt);
        outcome.lin = Some(KernelFit { fit, analytic, n_samples: samples.len() });
    }
    if outcome.quad.is_none() && outcome.lin.is_none() {
        return Err(Error::DegenerateCalibration { reason: "no kernels configured".into() });
    }
    Ok(outcome)
}

/// Plan + run + fit with the setup's own seed and envelope.
pub fn run_calibration(setup: &SimSetup) -> Result<(ExcitationPlan, CalibrationOutcome)> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(setup.seed ^ 0x9e37_79b9_7f4a_7c15);
    let plan = ExcitationPlan::randomized(
        setup.x0,
        setup.span,
        setup.envelope.v_max,
        setup.envelope.a_max,
        setup.duration,
        &mut rng,
    )?;
    let obs = run_excitation(setup, &plan, false)?;
    let outcome = calibrate_from_observations(setup, &obs)?;
    Ok((plan, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ConfigFile;
    use approx::assert_abs_diff_eq;

    fn setup(duration: f64, seed: u64) -> SimSetup {
        let text = format!(
            r#"
[scene]
kind = "dual_split"

[controller]
a = 0.18
omega = 4.18879
gain = 1.5

[sim]
duration = {duration}
dt = 0.002
h = 0.0002
seed = {seed}
"#
        );
        ConfigFile::parse(&text).unwrap().resolve().unwrap()
    }

    #[test]
    fn fractional_counts_match_the_closed_form_per_window() {
        let mut s = setup(4.0, 7);
        s.dvs.mode = DvsMode::IdealFractional;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let plan =
            ExcitationPlan::randomized(0.0, s.span, 0.45, 2.0, s.duration, &mut rng).unwrap();
        let obs = run_excitation(&s, &plan, true).unwrap();
        assert_eq!(obs.len(), s.n_windows);
        let quad = s.quad_kernel.as_ref().unwrap();
        let lin = s.lin_kernel.as_ref().unwrap();
        for o in obs.iter().step_by(97) {
            let t_end = o.window.end_us() as f64 * 1e-6;
            let (x_end, _, _) = plan.state_at(t_end);
            let nq = quad.exact_fraction(
                &s.pattern,
                &s.intr,
                s.dvs.contrast,
                o.x_start,
                x_end,
                0.0,
            );
            let nl =
                lin.exact_fraction(&s.pattern, &s.intr, s.dvs.contrast, o.x_start, x_end, 0.0);
            assert_abs_diff_eq!(o.n_quad.unwrap(), nq, epsilon = 1e-9);
            assert_abs_diff_eq!(o.n_lin.unwrap(), nl, epsilon = 1e-9);
        }
    }

    #[test]
    fn continuous_fractional_counts_telescope() {
        let mut s = setup(4.0, 11);
        s.dvs.mode = DvsMode::IdealFractional;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let plan =
            ExcitationPlan::randomized(0.0, s.span, 0.45, 2.0, s.duration, &mut rng).unwrap();
        let obs = run_excitation(&s, &plan, false).unwrap();
        let total: f64 = obs.iter().map(|o| o.n_lin.unwrap()).sum();
        let lin = s.lin_kernel.as_ref().unwrap();
        let t_end = obs.last().unwrap().window.end_us() as f64 * 1e-6;
        let (x_end, _, _) = plan.state_at(t_end);
        let direct =
            lin.exact_fraction(&s.pattern, &s.intr, s.dvs.contrast, plan.state_at(0.0).0, x_end, 0.0);
        assert_abs_diff_eq!(total, direct, epsilon = 1e-9);
    }

    #[test]
    fn fractional_calibration_recovers_the_analytic_constants() {
        let mut s = setup(4.0, 19);
        s.dvs.mode = DvsMode::IdealFractional;
        let (_, outcome) = run_calibration(&s).unwrap();
        let q = outcome.quad.unwrap();
        let l = outcome.lin.unwrap();
        assert!(q.relative_error() < 1e-4, "quad error {}", q.relative_error());
        assert!(l.relative_error() < 1e-4, "lin error {}", l.relative_error());
        assert!(q.fit.relative_residual() < 1e-3);
        assert!(l.fit.relative_residual() < 1e-3);
        assert!(q.n_samples >= 1000);
    }

    #[test]
    fn latched_counts_track_fractional_within_pixel_count() {
        let mut s = setup(1.0, 23);
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let plan =
            ExcitationPlan::randomized(0.0, s.span, 0.45, 2.0, s.duration, &mut rng).unwrap();
        s.dvs.mode = DvsMode::Latched;
        let latched = run_excitation(&s, &plan, true).unwrap();
        s.dvs.mode = DvsMode::IdealFractional;
        let fractional = run_excitation(&s, &plan, true).unwrap();
        let quad = s.quad_kernel.as_ref().unwrap();
        let slack = quad.pixel_count() as f64;
        for (a, b) in latched.iter().zip(&fractional) {
            let gap = (a.n_quad.unwrap() - b.n_quad.unwrap()).abs();
            assert!(gap < slack, "gap {gap} exceeds pixel count {slack}");
        }
    }

    #[test]
    fn missing_kernels_yield_no_fit() {
        let s = setup(4.0, 3);
        let mut no_kernel = s.clone();
        no_kernel.quad_kernel = None;
        no_kernel.lin_kernel = None;
        let err = calibrate_from_observations(&no_kernel, &[]).unwrap_err();
        assert!(matches!(err, Error::DegenerateCalibration { .. }));
    }
}
