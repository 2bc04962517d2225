//! Exponential-stability certification of the tracking error dynamics.
//!
//! Linearizing the closed loop about the reference orbit gives a periodic
//! linear system with period `pi / omega`. Two independent verdicts are
//! computed: a quadratic Lyapunov certificate whose derivative matrix must
//! stay positive semidefinite over one period (sound for all feedback
//! strengths up to a closed-form threshold `delta_dagger`), and a Floquet
//! analysis of the monodromy matrix whose spectral radius decides stability
//! sharply. The certificate is sufficient only, so a band above the
//! threshold where Floquet still reports stability is expected and flagged
//! as conservative.

use nalgebra::{Complex, Matrix2, Vector2};

use crate::error::{Error, Result};

/// Parameters of the linearized periodic error system.
#[derive(Debug, Clone, Copy)]
pub struct LtvParams {
    /// Dimensionless feedback strength (gain times amplitude squared).
    pub delta: f64,
    /// Orbit angular frequency, rad/s.
    pub omega: f64,
    /// Effective damping, 1/s.
    pub p1: f64,
}

impl LtvParams {
    pub fn new(delta: f64, omega: f64, p1: f64) -> Result<Self> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("got {delta}, need finite nonnegative"),
            });
        }
        if !omega.is_finite() || omega <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: format!("got {omega}, need finite positive"),
            });
        }
        if !p1.is_finite() || p1 <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "p1",
                reason: format!("got {p1}, need finite positive"),
            });
        }
        Ok(Self { delta, omega, p1 })
    }

    /// Period of the coefficient matrix: half the orbit period, because the
    /// periodic terms are `cos^2` and `sin(2 omega t)`.
    pub fn period(&self) -> f64 {
        std::f64::consts::PI / self.omega
    }

    /// System matrix at time `t`.
    pub fn a_of_t(&self, t: f64) -> Matrix2<f64> {
        let c = (self.omega * t).cos();
        let s2 = (2.0 * self.omega * t).sin();
        Matrix2::new(
            0.0,
            1.0,
            -self.delta * self.omega * self.omega * c * c,
            -self.p1 - self.delta * self.omega * s2,
        )
    }
}

/// Optimal Lyapunov shape parameter: the value of `eta` that maximizes the
/// certified feedback range for given damping and frequency.
pub fn eta_dagger(p1: f64, omega: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * p1 * p1 / (omega * omega)).sqrt()) / (p1 * p1)
}

/// Certified feedback threshold: the certificate below holds for every
/// `delta` in `(0, delta_dagger]`.
pub fn delta_dagger(p1: f64, omega: f64) -> f64 {
    ((omega * omega + 4.0 * p1 * p1).sqrt() - omega) / (2.0 * omega)
}

/// Quadratic Lyapunov candidate `V = e' P e` with
/// `P = [[1, 1/p1], [1/p1, eta]]`; positive definite when `eta * p1^2 > 1`.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovCertificate {
    eta: f64,
    p1: f64,
}

impl LyapunovCertificate {
    pub fn new(eta: f64, p1: f64) -> Result<Self> {
        if !(p1.is_finite() && p1 > 0.0 && eta.is_finite()) || eta * p1 * p1 <= 1.0 {
            return Err(Error::InvalidParameter {
                name: "certificate shape",
                reason: format!("eta = {eta}, p1 = {p1}; need eta * p1^2 > 1"),
            });
        }
        Ok(Self { eta, p1 })
    }

    /// Certificate at the optimal shape parameter; always valid because
    /// `eta_dagger * p1^2 > 1` by construction.
    pub fn optimal(p1: f64, omega: f64) -> Self {
        Self { eta: eta_dagger(p1, omega), p1 }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn p_matrix(&self) -> Matrix2<f64> {
        let q = 1.0 / self.p1;
        Matrix2::new(1.0, q, q, self.eta)
    }

    /// Derivative matrix `Q(t) = -(P A(t) + A(t)' P) / 2`; the certificate
    /// holds when `Q` is positive semidefinite for all `t`.
    pub fn q_of_t(&self, lp: &LtvParams, t: f64) -> Matrix2<f64> {
        let p = self.p_matrix();
        let a = lp.a_of_t(t);
        -0.5 * (p * a + a.transpose() * p)
    }
}

/// Sampled positive-semidefiniteness check of `Q` over one period, with
/// local refinement around the determinant minima (the exact zeros of
/// `det Q` are isolated). A small negative tolerance absorbs round-off at
/// those zeros.
pub fn verify_certificate(
    lp: &LtvParams,
    cert: &LyapunovCertificate,
    n_samples: usize,
) -> Result<bool> {
    const TOL: f64 = -1e-12;
    if n_samples < 1000 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            reason: format!("got {n_samples}, need at least 1000 per period"),
        });
    }
    let period = lp.period();
    let dt = period / n_samples as f64;
    let trace_at = |t: f64| cert.q_of_t(lp, t).trace();
    let det_at = |t: f64| cert.q_of_t(lp, t).determinant();

    let dets: Vec<f64> = (0..=n_samples).map(|i| det_at(i as f64 * dt)).collect();
    for (i, &d) in dets.iter().enumerate() {
        if trace_at(i as f64 * dt) < TOL || d < TOL {
            return Ok(false);
        }
    }
    // Refine around sampled local minima of the determinant.
    for i in 1..n_samples {
        if dets[i] <= dets[i - 1] && dets[i] <= dets[i + 1] {
            let (mut lo, mut hi) = ((i - 1) as f64 * dt, (i + 1) as f64 * dt);
            for _ in 0..80 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if det_at(m1) < det_at(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let t_min = 0.5 * (lo + hi);
            if det_at(t_min) < TOL || trace_at(t_min) < TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Integral of the smallest eigenvalue of `Q(t)` over one period; the
/// certificate's guaranteed decay budget per period.
pub fn lyapunov_decay_integral(lp: &LtvParams, cert: &LyapunovCertificate, n: usize) -> f64 {
    let period = lp.period();
    let dt = period / n as f64;
    let lambda_min = |t: f64| {
        let q = cert.q_of_t(lp, t);
        let tr = q.trace();
        let disc = (q[(0, 0)] - q[(1, 1)]).powi(2) + 4.0 * q[(0, 1)] * q[(0, 1)];
        0.5 * (tr - disc.sqrt())
    };
    // Composite trapezoid.
    let mut sum = 0.5 * (lambda_min(0.0) + lambda_min(period));
    for i in 1..n {
        sum += lambda_min(i as f64 * dt);
    }
    sum * dt
}

/// Floquet data for one parameter point.
#[derive(Debug, Clone)]
pub struct FloquetAnalysis {
    pub monodromy: Matrix2<f64>,
    pub multipliers: [Complex<f64>; 2],
    pub spectral_radius: f64,
    /// `-ln(spectral radius) / period`; positive for a stable system.
    pub decay_rate: f64,
    pub determinant: f64,
}

/// Integrate the fundamental matrix over one period with classical RK4 and
/// return the monodromy matrix and its multipliers. The step must resolve
/// the period to at least one part in a thousand.
pub fn monodromy(lp: &LtvParams, h: f64) -> Result<FloquetAnalysis> {
    let period = lp.period();
    let max = period / 1000.0;
    if !(h > 0.0) || h > max {
        return Err(Error::StepTooCoarse { h, max });
    }
    let n = (period / h).ceil() as usize;
    let h = period / n as f64;
    let mut x = Matrix2::identity();
    for i in 0..n {
        let t = i as f64 * h;
        let k1 = lp.a_of_t(t) * x;
        let k2 = lp.a_of_t(t + 0.5 * h) * (x + 0.5 * h * k1);
        let k3 = lp.a_of_t(t + 0.5 * h) * (x + 0.5 * h * k2);
        let k4 = lp.a_of_t(t + h) * (x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let tr = x.trace();
    let det = x.determinant();
    let disc = tr * tr - 4.0 * det;
    let multipliers = if disc >= 0.0 {
        let r = disc.sqrt();
        [
            Complex::new(0.5 * (tr + r), 0.0),
            Complex::new(0.5 * (tr - r), 0.0),
        ]
    } else {
        let i = (-disc).sqrt() * 0.5;
        [Complex::new(0.5 * tr, i), Complex::new(0.5 * tr, -i)]
    };
    let spectral_radius = multipliers[0].norm().max(multipliers[1].norm());
    Ok(FloquetAnalysis {
        monodromy: x,
        multipliers,
        spectral_radius,
        decay_rate: -spectral_radius.ln() / period,
        determinant: det,
    })
}

/// Joint verdict for one feedback strength.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub delta: f64,
    pub delta_dagger: f64,
    pub eta_dagger: f64,
    /// Sampled Lyapunov certificate verdict at the optimal shape.
    pub cert_ok: bool,
    pub floquet: FloquetAnalysis,
    /// Certificate decay budget per period (quadrature of the smallest
    /// eigenvalue of `Q`).
    pub lyap_decay_integral: f64,
    /// Floquet-stable but outside the certificate: the sufficiency gap.
    pub conservative: bool,
}

/// Evaluate certificate and Floquet verdicts over a grid of feedback
/// strengths at fixed damping and frequency.
pub fn stability_scan(p1: f64, omega: f64, deltas: &[f64]) -> Result<Vec<StabilityReport>> {
    if deltas.is_empty() {
        return Err(Error::InvalidParameter {
            name: "delta grid",
            reason: "need at least one point".into(),
        });
    }
    let dd = delta_dagger(p1, omega);
    let ed = eta_dagger(p1, omega);
    let cert = LyapunovCertificate::optimal(p1, omega);
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let lp = LtvParams::new(delta, omega, p1)?;
        let cert_ok = verify_certificate(&lp, &cert, 4096)?;
        let floquet = monodromy(&lp, lp.period() / 4096.0)?;
        let stable = floquet.spectral_radius < 1.0;
        out.push(StabilityReport {
            delta,
            delta_dagger: dd,
            eta_dagger: ed,
            cert_ok,
            conservative: stable && !cert_ok,
            lyap_decay_integral: lyapunov_decay_integral(&lp, &cert, 4096),
            floquet,
        });
    }
    Ok(out)
}

/// Norm history of the error system sampled once per period from a fixed
/// initial condition; used for decay-rate cross-checks.
pub fn period_norm_history(
    analysis: &FloquetAnalysis,
    x0: Vector2<f64>,
    n_periods: usize,
) -> Vec<f64> {
    let mut x = x0;
    let mut out = Vec::with_capacity(n_periods + 1);
    out.push(x.norm());
    for _ in 0..n_periods {
        x = analysis.monodromy * x;
        out.push(x.norm());
    }
    out
}
