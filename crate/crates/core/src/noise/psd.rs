use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, golden_section_min};

/// One-sided power spectral density over angular frequency `omega >= 0`.
///
/// Convention: `C(t) = (1/pi) * integral_0^inf S(omega) cos(omega t) d omega`,
/// so `S(omega)` is the two-sided Fourier transform of the autocovariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsdSpec {
    /// Flat `S0` on `[0, omega_uv]`.
    White { s0: f64, omega_uv: f64 },
    /// `amplitude / omega` on `[omega_ir, omega_uv]`.
    Pink { amplitude: f64, omega_ir: f64, omega_uv: f64 },
    /// `2 variance tau_c / (1 + omega^2 tau_c^2)` on `[0, omega_uv]`; the
    /// autocovariance tends to `variance * exp(-|t|/tau_c)` as the cutoff grows.
    Lorentzian {
        #[serde(alias = "s0")]
        variance: f64,
        tau_c: f64,
        omega_uv: f64,
    },
    /// Piecewise-linear interpolation of tabulated values, zero outside the table.
    Tabulated { omega: Vec<f64>, values: Vec<f64> },
}

impl PsdSpec {
    /// Lorentzian with the cutoff placed at `100 / tau_c`.
    pub fn lorentzian(variance: f64, tau_c: f64) -> Self {
        PsdSpec::Lorentzian { variance, tau_c, omega_uv: 100.0 / tau_c }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpectrum(msg));
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        match self {
            PsdSpec::White { s0, omega_uv } => {
                if !(s0.is_finite() && *s0 >= 0.0) || !finite_pos(*omega_uv) {
                    return bad(format!("white needs s0 >= 0 and omega_uv > 0 (got {s0}, {omega_uv})"));
                }
            }
            PsdSpec::Pink { amplitude, omega_ir, omega_uv } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return bad(format!("pink amplitude must be >= 0, got {amplitude}"));
                }
                if !(finite_pos(*omega_ir) && omega_ir < omega_uv && omega_uv.is_finite()) {
                    return bad(format!("pink needs 0 < omega_ir < omega_uv (got {omega_ir}, {omega_uv})"));
                }
            }
            PsdSpec::Lorentzian { variance, tau_c, omega_uv } => {
                if !(variance.is_finite() && *variance >= 0.0) || !finite_pos(*tau_c) || !finite_pos(*omega_uv) {
                    return bad(format!(
                        "lorentzian needs variance >= 0, tau_c > 0, omega_uv > 0 (got {variance}, {tau_c}, {omega_uv})"
                    ));
                }
            }
            PsdSpec::Tabulated { omega, values } => {
                if omega.len() < 2 || omega.len() != values.len() {
                    return bad("tabulated spectrum needs >= 2 points and matching lengths".into());
                }
                if omega[0] < 0.0 || omega.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("tabulated frequencies must be >= 0 and strictly increasing".into());
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("tabulated values must be finite and >= 0".into());
                }
            }
        }
        Ok(())
    }

    /// `S(omega)`; zero outside the band.
    pub fn density(&self, omega: f64) -> f64 {
        let (lo, hi) = self.band();
        if omega < lo || omega > hi {
            return 0.0;
        }
        match self {
            PsdSpec::White { s0, .. } => *s0,
            PsdSpec::Pink { amplitude, .. } => amplitude / omega,
            PsdSpec::Lorentzian { variance, tau_c, .. } => {
                2.0 * variance * tau_c / (1.0 + omega * omega * tau_c * tau_c)
            }
            PsdSpec::Tabulated { omega: w, values } => {
                let k = w.partition_point(|&x| x <= omega).clamp(1, w.len() - 1);
                let f = (omega - w[k - 1]) / (w[k] - w[k - 1]);
                values[k - 1] + f * (values[k] - values[k - 1])
            }
        }
    }

    /// Support `[omega_lo, omega_hi]`.
    pub fn band(&self) -> (f64, f64) {
        match self {
            PsdSpec::White { omega_uv, .. } | PsdSpec::Lorentzian { omega_uv, .. } => (0.0, *omega_uv),
            PsdSpec::Pink { omega_ir, omega_uv, .. } => (*omega_ir, *omega_uv),
            PsdSpec::Tabulated { omega, .. } => (omega[0], *omega.last().unwrap()),
        }
    }

    pub fn omega_uv(&self) -> f64 {
        self.band().1
    }

    /// `max_omega S(omega)`.
    pub fn max_density(&self) -> f64 {
        match self {
            PsdSpec::White { s0, .. } => *s0,
            PsdSpec::Pink { amplitude, omega_ir, .. } => amplitude / omega_ir,
            PsdSpec::Lorentzian { variance, tau_c, .. } => 2.0 * variance * tau_c,
            PsdSpec::Tabulated { values, .. } => values.iter().fold(0.0, |m, v| m.max(*v)),
        }
    }

    /// Copy with the spectral density multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            PsdSpec::White { s0, .. } => *s0 *= factor,
            PsdSpec::Pink { amplitude, .. } => *amplitude *= factor,
            PsdSpec::Lorentzian { variance, .. } => *variance *= factor,
            PsdSpec::Tabulated { values, .. } => values.iter_mut().for_each(|v| *v *= factor),
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.max_density() == 0.0
    }
}

/// `C(t) = (1/pi) * integral S(omega) cos(omega t) d omega` over the band, by
/// adaptive quadrature.
pub fn autocorrelation(psd: &PsdSpec, t: f64) -> f64 {
    let t = t.abs();
    let (lo, hi) = psd.band();
    let oscillations = (hi - lo) * t / PI;
    let panels = 16 + (4.0 * oscillations).ceil() as usize;
    let integral = match psd {
        PsdSpec::White { s0, omega_uv } => {
            if t == 0.0 {
                s0 * omega_uv
            } else {
                s0 * (omega_uv * t).sin() / t
            }
        }
        PsdSpec::Pink { amplitude, omega_ir, omega_uv } => {
            // omega = e^u flattens the 1/omega singularity.
            let tol = 1e-12 * amplitude * (omega_uv / omega_ir).ln();
            amplitude
                * adaptive_simpson(|u| (u.exp() * t).cos(), omega_ir.ln(), omega_uv.ln(), panels, tol / amplitude.max(1e-300))
        }
        PsdSpec::Lorentzian { .. } => {
            let tol = 1e-12 * psd.max_density() * hi;
            adaptive_simpson(|w| psd.density(w) * (w * t).cos(), lo, hi, panels, tol)
        }
        PsdSpec::Tabulated { omega, .. } => omega
            .windows(2)
            .map(|w| {
                let p = 2 + ((w[1] - w[0]) * t / PI * 4.0).ceil() as usize;
                let tol = 1e-12 * psd.max_density() * (w[1] - w[0]);
                adaptive_simpson(|x| psd.density(x) * (x * t).cos(), w[0], w[1], p, tol)
            })
            .sum(),
    };
    integral / PI
}

/// Exponential decay time of `C(t)`, from a least-squares fit of
/// `C(0) exp(-t/tau)` over `[0, t*]`, with `t*` the first time `C` drops below
/// `C(0)/e^2`.
pub fn correlation_length(psd: &PsdSpec) -> Result<f64> {
    psd.validate()?;
    if let PsdSpec::White { .. } = psd {
        return Err(Error::NoCorrelationLength("white noise is delta-correlated".into()));
    }
    let c0 = autocorrelation(psd, 0.0);
    if !(c0 > 0.0) {
        return Err(Error::NoCorrelationLength("zero variance".into()));
    }
    let target = c0 * (-2.0f64).exp();
    let (lo, hi) = psd.band();
    let t_max = if lo > 0.0 { 1e3 / lo } else { 1e4 / hi };

    // Geometric scan for a bracket, then bisection.
    let mut prev = 0.0;
    let mut t = 0.01 / hi;
    let t_star = loop {
        if t > t_max {
            return Err(Error::NoCorrelationLength(format!(
                "autocovariance stays above C(0)/e^2 up to t = {t_max:e}"
            )));
        }
        if autocorrelation(psd, t) < target {
            let (mut a, mut b) = (prev, t);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if autocorrelation(psd, m) < target {
                    b = m;
                } else {
                    a = m;
                }
            }
            break b;
        }
        prev = t;
        t *= 1.1;
    };

    let samples = 200;
    let ts: Vec<f64> = (0..=samples).map(|k| t_star * k as f64 / samples as f64).collect();
    let cs: Vec<f64> = ts.iter().map(|&t| autocorrelation(psd, t)).collect();
    let loss = |tau: f64| -> f64 {
        ts.iter().zip(&cs).map(|(&t, &c)| (c - c0 * (-t / tau).exp()).powi(2)).sum()
    };
    Ok(golden_section_min(loss, t_star / 50.0, 5.0 * t_star, 1e-10))
}
