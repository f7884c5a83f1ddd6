use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::control::ControlMatrix;
use crate::basis::{classify_operator, QBasis};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::noise::{traceless, NoiseModel, SynthesisPlan};
use crate::operator::{CMatrix, RMatrix};

/// Entries of the step integrals below this fraction of the largest one are
/// treated as exact zeros.
pub const ACTIVE_TOL: f64 = 1e-12;

/// Whether the (effective) noise operators commute with the symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseClass {
    Preserving,
    Breaking,
}

/// Which autocovariance feeds the time-domain double integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceSource {
    /// Covariance of the harmonic synthesiser with this mode setting, i.e.
    /// exactly the second moment seen by the Monte Carlo ensemble.
    Synthesized { modes: Option<usize> },
    /// Adaptive quadrature of the continuous spectrum.
    Continuous,
}

/// Groups of channels driven by one shared amplitude (unit correlation and
/// identical spectra). Such channels act as a single channel whose operator
/// is the sum of the members.
pub fn channel_groups(model: &NoiseModel) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..model.len() {
        match groups.iter_mut().find(|g| {
            let r = g[0];
            model.cross_correlation[(i, r)] == 1.0 && model.channels[i].psd == model.channels[r].psd
        }) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

/// Preserving iff every effective channel operator has no ladder weight.
pub fn noise_class(model: &NoiseModel, basis: &QBasis, tol: f64) -> Result<NoiseClass> {
    for g in channel_groups(model) {
        let mut op = CMatrix::zeros(model.dim(), model.dim());
        for &mu in &g {
            op += &model.channels[mu].operator;
        }
        let op = traceless(&op);
        if crate::operator::max_abs(&op) == 0.0 {
            continue;
        }
        if !classify_operator(&op, basis, tol)?.symmetry_preserving {
            return Ok(NoiseClass::Breaking);
        }
    }
    Ok(NoiseClass::Preserving)
}

/// Step integrals `rho_g(k, i) = dt (r_g(t_k, i) + r_g(t_{k+1}, i)) / 2` of the
/// effective channels.
#[derive(Debug, Clone)]
pub struct EffectiveChannels {
    pub grid: TimeGrid,
    pub groups: Vec<Vec<usize>>,
    /// One `steps x (N^2 - 1)` matrix per group.
    pub rho: Vec<RMatrix>,
    /// Generator indices with any nonzero step integral.
    pub active: Vec<usize>,
}

impl EffectiveChannels {
    pub fn new(cm: &ControlMatrix, model: &NoiseModel) -> Self {
        let groups = channel_groups(model);
        let steps = cm.grid.steps;
        let d = cm.generators();
        let half = 0.5 * cm.grid.dt;
        let mut rho: Vec<RMatrix> = groups
            .iter()
            .map(|g| {
                RMatrix::from_fn(steps, d, |k, i| {
                    let r: f64 = g.iter().map(|&mu| cm.r[mu][(k, i)] + cm.r[mu][(k + 1, i)]).sum();
                    half * r
                })
            })
            .collect();
        let max = rho.iter().fold(0.0f64, |m, r| m.max(r.amax()));
        let cut = ACTIVE_TOL * max;
        for r in rho.iter_mut() {
            r.apply(|v| {
                if v.abs() <= cut {
                    *v = 0.0;
                }
            });
        }
        let active = (0..d).filter(|&i| rho.iter().any(|r| r.column(i).iter().any(|v| *v != 0.0))).collect();
        EffectiveChannels { grid: cm.grid, groups, rho, active }
    }

    pub fn representative(&self, g: usize) -> usize {
        self.groups[g][0]
    }

    /// Step integrals restricted to the active generators.
    fn active_rho(&self, g: usize) -> RMatrix {
        RMatrix::from_fn(self.grid.steps, self.active.len(), |k, a| self.rho[g][(k, self.active[a])])
    }

    /// Group pairs with nonzero correlation, in a fixed order.
    fn correlated_pairs(&self, model: &NoiseModel) -> Vec<(usize, usize)> {
        let n = self.groups.len();
        let mut out = Vec::new();
        for g in 0..n {
            for h in 0..n {
                if model.cross_correlation[(self.representative(g), self.representative(h))] != 0.0 {
                    out.push((g, h));
                }
            }
        }
        out
    }
}

/// Coherence parameters: `chi1` symmetric, `chi2` antisymmetric, both
/// indexed by generators.
#[derive(Debug, Clone)]
pub struct CoherenceParams {
    pub chi1: RMatrix,
    pub chi2: RMatrix,
    pub active: Vec<usize>,
}

impl CoherenceParams {
    pub fn zeros(d: usize) -> Self {
        CoherenceParams { chi1: RMatrix::zeros(d, d), chi2: RMatrix::zeros(d, d), active: Vec::new() }
    }

    fn from_ordered(lambda_active: RMatrix, active: Vec<usize>, d: usize) -> Self {
        let mut chi1 = RMatrix::zeros(d, d);
        let mut chi2 = RMatrix::zeros(d, d);
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                chi1[(i, j)] = -0.5 * (lambda_active[(a, b)] + lambda_active[(b, a)]);
                chi2[(i, j)] = -0.25 * (lambda_active[(a, b)] - lambda_active[(b, a)]);
            }
        }
        CoherenceParams { chi1, chi2, active }
    }
}

fn check_nyquist(grid: &TimeGrid, model: &NoiseModel) -> Result<()> {
    let limit = PI / model.omega_uv();
    if grid.dt >= limit {
        return Err(Error::Nyquist { dt: grid.dt, limit });
    }
    Ok(())
}

/// Time-domain coherence parameters from the ordered double integral
/// `Lambda_ij = sum_{gh} sum_{k>l} C_gh((k-l) dt) rho_gi(k) rho_hj(l)
///            + 1/2 sum_k C_gh(0) rho_gi(k) rho_hj(k)`,
/// `chi1 = -(Lambda + Lambda^T)/2`, `chi2 = -(Lambda - Lambda^T)/4`.
pub fn coherence_params(cm: &ControlMatrix, model: &NoiseModel, source: CovarianceSource) -> Result<CoherenceParams> {
    check_nyquist(&cm.grid, model)?;
    let eff = EffectiveChannels::new(cm, model);
    let d = cm.generators();
    let steps = cm.grid.steps;
    if eff.active.is_empty() || model.max_density() == 0.0 {
        return Ok(CoherenceParams::zeros(d));
    }
    let plan = match source {
        CovarianceSource::Synthesized { modes } => Some(SynthesisPlan::new(model, cm.grid, modes)?),
        CovarianceSource::Continuous => None,
    };
    let covariance = |g: usize, h: usize| -> Vec<f64> {
        let (mu, nu) = (eff.representative(g), eff.representative(h));
        (0..steps)
            .map(|l| {
                let s = l as f64 * cm.grid.dt;
                match &plan {
                    Some(p) => p.realized_covariance(mu, nu, s),
                    None => model.covariance(mu, nu, s),
                }
            })
            .collect()
    };
    let rho: Vec<RMatrix> = (0..eff.groups.len()).map(|g| eff.active_rho(g)).collect();
    let pairs = eff.correlated_pairs(model);
    let parts: Vec<RMatrix> = pairs
        .par_iter()
        .map(|&(g, h)| {
            let c = covariance(g, h);
            let kernel = RMatrix::from_fn(steps, steps, |k, l| match k.cmp(&l) {
                std::cmp::Ordering::Greater => c[k - l],
                std::cmp::Ordering::Equal => 0.5 * c[0],
                std::cmp::Ordering::Less => 0.0,
            });
            rho[g].transpose() * (kernel * &rho[h])
        })
        .collect();
    let na = eff.active.len();
    let lambda = parts.into_iter().fold(RMatrix::zeros(na, na), |acc, p| acc + p);
    Ok(CoherenceParams::from_ordered(lambda, eff.active, d))
}

/// Frequency grid for overlap integrals: uniform with step `pi / (16 T)`
/// (at least 256 points over the band) plus logarithmic points near an
/// infrared cutoff.
pub fn default_omega_grid(model: &NoiseModel, duration: f64) -> Vec<f64> {
    let lo = model.channels.iter().fold(f64::INFINITY, |m, c| m.min(c.psd.band().0));
    let hi = model.omega_uv();
    let step = (PI / (16.0 * duration)).min((hi - lo) / 256.0);
    let n = ((hi - lo) / step).ceil() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    if lo > 0.0 {
        let top = hi.min(100.0 * lo);
        let m = 96;
        grid.extend((0..=m).map(|k| lo * (top / lo).powf(k as f64 / m as f64)));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    grid
}

/// Trapezoid weights of a sorted grid.
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let h = 0.5 * (x[k + 1] - x[k]);
        w[k] += h;
        w[k + 1] += h;
    }
    w
}

/// First- and second-order filter functions of the effective channels.
///
/// `rtilde[g][(w, i)] = sum_k rho_gi(k) exp(i omega_w (t_k + dt/2))`; the
/// first-order filter function is `F^{gh}_ij = rtilde_gi conj(rtilde_hj)` and
/// the second-order one is
/// `G^{gh}_ij = sum_{kl} sign(k - l) cos(omega (t_k - t_l)) rho_gi(k) rho_hj(l)`.
#[derive(Debug, Clone)]
pub struct FilterFunctions {
    pub omega: Vec<f64>,
    pub channels: EffectiveChannels,
    pub rtilde: Vec<CMatrix>,
}

impl FilterFunctions {
    pub fn compute(cm: &ControlMatrix, model: &NoiseModel, omega: Vec<f64>) -> Result<Self> {
        check_nyquist(&cm.grid, model)?;
        let channels = EffectiveChannels::new(cm, model);
        let mids = cm.grid.midpoints();
        let d = cm.generators();
        let phases =
            CMatrix::from_fn(omega.len(), mids.len(), |w, k| Complex64::from_polar(1.0, omega[w] * mids[k]));
        let rtilde = channels
            .rho
            .iter()
            .map(|rho| {
                let mut out = CMatrix::zeros(omega.len(), d);
                for &i in &channels.active {
                    let col = rho.column(i).map(|v| Complex64::new(v, 0.0));
                    out.set_column(i, &(&phases * col));
                }
                out
            })
            .collect();
        Ok(FilterFunctions { omega, channels, rtilde })
    }

    pub fn groups(&self) -> usize {
        self.channels.groups.len()
    }

    /// `F^{gh}_ij(omega_w)`.
    pub fn first_order(&self, g: usize, h: usize, w: usize) -> CMatrix {
        let a = self.rtilde[g].row(w).transpose();
        let b = self.rtilde[h].row(w).transpose();
        &a * b.adjoint()
    }

    /// `sum_{k>l} cos(omega (t_k - t_l)) rho_gi(k) rho_hj(l)` on the active block.
    fn ordered_half(&self, g: usize, h: usize, w: usize) -> RMatrix {
        let omega = self.omega[w];
        let grid = self.channels.grid;
        let act = &self.channels.active;
        let steps = grid.steps;
        let a = CMatrix::from_fn(steps, act.len(), |k, i| {
            Complex64::from_polar(self.channels.rho[g][(k, act[i])], omega * grid.midpoint(k))
        });
        let mut prefix = CMatrix::zeros(steps, act.len());
        for k in 1..steps {
            let phase = Complex64::from_polar(1.0, -omega * grid.midpoint(k - 1));
            for j in 0..act.len() {
                prefix[(k, j)] = prefix[(k - 1, j)] + phase * self.channels.rho[h][(k - 1, act[j])];
            }
        }
        (a.transpose() * prefix).map(|z| z.re)
    }

    /// `G^{gh}_ij(omega_w)` on the active block (indexed like `channels.active`).
    pub fn second_order_active(&self, g: usize, h: usize, w: usize) -> RMatrix {
        let m_gh = self.ordered_half(g, h, w);
        if g == h {
            return &m_gh - m_gh.transpose();
        }
        let m_hg = self.ordered_half(h, g, w);
        m_gh - m_hg.transpose()
    }

    /// `G^{gh}_ij(omega_w)` over all generators.
    pub fn second_order(&self, g: usize, h: usize, w: usize) -> RMatrix {
        let act = &self.channels.active;
        let d = self.rtilde[0].ncols();
        let small = self.second_order_active(g, h, w);
        let mut out = RMatrix::zeros(d, d);
        for (a, &i) in act.iter().enumerate() {
            for (b, &j) in act.iter().enumerate() {
                out[(i, j)] = small[(a, b)];
            }
        }
        out
    }

    /// Frequency-domain coherence parameters,
    /// `chi1 = -(1/2pi) int S_gh Re F^{gh}`, `chi2 = -(1/4pi) int S_gh G^{gh}`.
    pub fn coherence_params(&self, model: &NoiseModel) -> CoherenceParams {
        let d = self.rtilde[0].ncols();
        let act = self.channels.active.clone();
        let na = act.len();
        if na == 0 {
            return CoherenceParams::zeros(d);
        }
        let weights = trapezoid_weights(&self.omega);
        let pairs = self.channels.correlated_pairs(model);
        let parts: Vec<(RMatrix, RMatrix)> = pairs
            .par_iter()
            .map(|&(g, h)| {
                let (mu, nu) = (self.channels.representative(g), self.channels.representative(h));
                let mut sym = RMatrix::zeros(na, na);
                let mut anti = RMatrix::zeros(na, na);
                for (w, &omega) in self.omega.iter().enumerate() {
                    let s = model.cross_density(mu, nu, omega) * weights[w];
                    if s == 0.0 {
                        continue;
                    }
                    for (a, &i) in act.iter().enumerate() {
                        let ri = self.rtilde[g][(w, i)];
                        for (b, &j) in act.iter().enumerate() {
                            sym[(a, b)] += s * (ri * self.rtilde[h][(w, j)].conj()).re;
                        }
                    }
                    anti += self.second_order_active(g, h, w) * s;
                }
                (sym, anti)
            })
            .collect();
        let (sym, anti) = parts
            .into_iter()
            .fold((RMatrix::zeros(na, na), RMatrix::zeros(na, na)), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        let mut chi1 = RMatrix::zeros(d, d);
        let mut chi2 = RMatrix::zeros(d, d);
        for (a, &i) in act.iter().enumerate() {
            for (b, &j) in act.iter().enumerate() {
                chi1[(i, j)] = -sym[(a, b)] / (2.0 * PI);
                chi2[(i, j)] = -anti[(a, b)] / (4.0 * PI);
            }
        }
        let chi1 = (&chi1 + chi1.transpose()) * 0.5;
        let chi2 = (&chi2 - chi2.transpose()) * 0.5;
        CoherenceParams { chi1, chi2, active: act }
    }

    /// CSV of the diagonal first-order filter functions `F^{gg}_ii(omega)`
    /// for every effective channel and active generator.
    pub fn write_csv<W: Write>(&self, basis: &QBasis, mut out: W) -> Result<()> {
        write!(out, "omega")?;
        for g in 0..self.groups() {
            for &i in &self.channels.active {
                write!(out, ",F[{g}]{}", basis.labels[i])?;
            }
        }
        writeln!(out)?;
        for (w, omega) in self.omega.iter().enumerate() {
            write!(out, "{omega}")?;
            for g in 0..self.groups() {
                for &i in &self.channels.active {
                    write!(out, ",{}", self.rtilde[g][(w, i)].norm_sqr())?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
