//! CSV serialization for run artifacts. Floats print with the shortest
//! round-trip form so identical runs produce byte-identical files.

use std::io::{self, Write};

use crate::harness::bounds::KernelSweep;
use crate::harness::closed_loop::TrajectoryRecord;
use crate::harness::open_loop::CalibrationOutcome;
use crate::stability::StabilityReport;

pub fn write_trajectory<W: Write>(w: &mut W, records: &[TrajectoryRecord]) -> io::Result<()> {
    writeln!(w, "t,x,x_dot,est_xv,est_v,fb,u_cmd,n_quad,n_lin,x_ref,v_ref")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.t, r.x, r.x_dot, r.est_xv, r.est_v, r.fb, r.u_cmd, r.n_quad, r.n_lin, r.x_ref,
            r.v_ref
        )?;
    }
    Ok(())
}

pub fn write_calibration<W: Write>(w: &mut W, outcome: &CalibrationOutcome) -> io::Result<()> {
    writeln!(w, "kernel,lumped_value,fit_residual,n_samples")?;
    if let Some(q) = &outcome.quad {
        writeln!(w, "quadratic,{},{},{}", q.fit.value, q.fit.fit_residual, q.n_samples)?;
    }
    if let Some(l) = &outcome.lin {
        writeln!(w, "linear,{},{},{}", l.fit.value, l.fit.fit_residual, l.n_samples)?;
    }
    Ok(())
}

pub fn write_bounds<W: Write>(w: &mut W, sweeps: &[KernelSweep]) -> io::Result<()> {
    writeln!(w, "window_t,n_net,M_dt,bound,ok")?;
    for sweep in sweeps {
        for r in &sweep.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.t,
                r.n_net,
                r.m_dt,
                r.bound,
                if r.ok { 1 } else { 0 }
            )?;
        }
    }
    Ok(())
}

pub fn write_stability<W: Write>(w: &mut W, reports: &[StabilityReport]) -> io::Result<()> {
    writeln!(w, "delta,delta_dagger,cert_ok,floquet_radius,decay_rate")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.delta,
            r.delta_dagger,
            if r.cert_ok { 1 } else { 0 },
            r.floquet.spectral_radius,
            r.floquet.decay_rate
        )?;
    }
    Ok(())
}
