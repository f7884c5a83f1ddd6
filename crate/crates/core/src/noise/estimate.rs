use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::synth::Trajectory;
use crate::error::{Error, Result};
use crate::quad::linear_fit;

pub const MIN_PERIODOGRAM_TRAJECTORIES: usize = 100;

/// Averaged cross spectrum of one channel pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossSpectrum {
    pub mu: usize,
    pub nu: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Averaged Hann-windowed periodograms, one-sided in `omega`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalPsd {
    pub omega: Vec<f64>,
    /// `auto[mu][k]` estimates `S_mu(omega_k)`.
    pub auto: Vec<Vec<f64>>,
    pub cross: Vec<CrossSpectrum>,
    pub trajectories: usize,
}

impl EmpiricalPsd {
    /// Least-squares slope of `log S` against `log omega` over `[lo, hi]`.
    pub fn loglog_slope(&self, channel: usize, lo: f64, hi: f64) -> f64 {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .omega
            .iter()
            .zip(&self.auto[channel])
            .filter(|(w, s)| **w >= lo && **w <= hi && **s > 0.0)
            .map(|(w, s)| (w.ln(), s.ln()))
            .unzip();
        linear_fit(&x, &y).0
    }

    /// Mean of the auto spectrum over `[lo, hi]`.
    pub fn band_mean(&self, channel: usize, lo: f64, hi: f64) -> f64 {
        let v: Vec<f64> = self
            .omega
            .iter()
            .zip(&self.auto[channel])
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .map(|(_, s)| *s)
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }

    pub fn cross_spectrum(&self, mu: usize, nu: usize) -> Option<&CrossSpectrum> {
        self.cross.iter().find(|c| c.mu == mu && c.nu == nu)
    }
}

/// Estimate auto and cross spectra from an ensemble of trajectories on a
/// common grid, normalised as `S(omega) = dt / sum(w^2) * |sum_n w_n x_n e^{-i omega t_n}|^2`.
pub fn empirical_psd(trajectories: &[Trajectory]) -> Result<EmpiricalPsd> {
    if trajectories.len() < MIN_PERIODOGRAM_TRAJECTORIES {
        return Err(Error::Config(format!(
            "periodogram needs at least {MIN_PERIODOGRAM_TRAJECTORIES} trajectories, got {}",
            trajectories.len()
        )));
    }
    let grid = trajectories[0].grid;
    let channels = trajectories[0].samples.len();
    if trajectories.iter().any(|t| !t.grid.matches(&grid) || t.samples.len() != channels) {
        return Err(Error::GridMismatch("trajectories do not share a grid and channel set".into()));
    }
    let len = grid.steps + 1;
    let window: Vec<f64> =
        (0..len).map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / (len - 1) as f64).cos())).collect();
    let norm = grid.dt / window.iter().map(|w| w * w).sum::<f64>();
    let bins = len / 2 + 1;

    let fft = FftPlanner::new().plan_fft_forward(len);
    let mut auto = vec![vec![0.0; bins]; channels];
    let mut cross: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); bins]; channels * channels];
    let mut spectra = vec![vec![Complex64::new(0.0, 0.0); len]; channels];
    for t in trajectories {
        for (mu, buf) in spectra.iter_mut().enumerate() {
            for (n, z) in buf.iter_mut().enumerate() {
                *z = Complex64::new(window[n] * t.samples[mu][n], 0.0);
            }
            fft.process(buf);
        }
        for mu in 0..channels {
            for k in 0..bins {
                auto[mu][k] += spectra[mu][k].norm_sqr();
            }
            for nu in mu + 1..channels {
                let acc = &mut cross[mu * channels + nu];
                for k in 0..bins {
                    acc[k] += spectra[mu][k] * spectra[nu][k].conj();
                }
            }
        }
    }
    let scale = norm / trajectories.len() as f64;
    let omega = (0..bins).map(|k| 2.0 * PI * k as f64 / (len as f64 * grid.dt)).collect();
    let auto = auto.into_iter().map(|v| v.into_iter().map(|s| s * scale).collect()).collect();
    let mut pairs = Vec::new();
    for mu in 0..channels {
        for nu in mu + 1..channels {
            let acc = &cross[mu * channels + nu];
            pairs.push(CrossSpectrum {
                mu,
                nu,
                re: acc.iter().map(|z| z.re * scale).collect(),
                im: acc.iter().map(|z| z.im * scale).collect(),
            });
        }
    }
    Ok(EmpiricalPsd { omega, auto, cross: pairs, trajectories: trajectories.len() })
}
