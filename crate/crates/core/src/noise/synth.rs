use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::psd::{autocorrelation, PsdSpec};
use crate::basis::{classify_operator, QBasis};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::operator::{hermiticity_deviation, is_hermitian, CMatrix, RMatrix};
use crate::quad::adaptive_simpson;

pub const DEFAULT_MODES: usize = 512;

/// A noise operator together with the spectrum of its classical amplitude.
#[derive(Debug, Clone)]
pub struct NoiseChannel {
    pub operator: CMatrix,
    pub psd: PsdSpec,
}

/// Channels `(N_mu, S_mu)` plus the correlation matrix of their amplitudes.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub channels: Vec<NoiseChannel>,
    pub cross_correlation: RMatrix,
}

impl NoiseModel {
    pub fn new(channels: Vec<NoiseChannel>, cross_correlation: RMatrix) -> Result<Self> {
        let m = channels.len();
        if m == 0 {
            return Err(Error::Config("noise model needs at least one channel".into()));
        }
        let n = channels[0].operator.nrows();
        for ch in &channels {
            if !ch.operator.is_square() || ch.operator.nrows() != n {
                return Err(Error::DimensionMismatch { expected: n, found: ch.operator.nrows() });
            }
            if !is_hermitian(&ch.operator) {
                return Err(Error::NotHermitian { deviation: hermiticity_deviation(&ch.operator) });
            }
            ch.psd.validate()?;
        }
        if cross_correlation.nrows() != m || cross_correlation.ncols() != m {
            return Err(Error::DimensionMismatch { expected: m, found: cross_correlation.nrows() });
        }
        for i in 0..m {
            if (cross_correlation[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("correlation diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                if (cross_correlation[(i, j)] - cross_correlation[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Config("correlation matrix is not symmetric".into()));
                }
            }
        }
        let min = cross_correlation.clone().symmetric_eigenvalues().min();
        if min < -1e-10 {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        Ok(NoiseModel { channels, cross_correlation })
    }

    /// Statistically independent channels.
    pub fn independent(channels: Vec<NoiseChannel>) -> Result<Self> {
        let m = channels.len();
        NoiseModel::new(channels, RMatrix::identity(m, m))
    }

    /// One shared amplitude driving every channel.
    pub fn fully_correlated(channels: Vec<NoiseChannel>) -> Result<Self> {
        let m = channels.len();
        NoiseModel::new(channels, RMatrix::from_element(m, m, 1.0))
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.channels[0].operator.nrows()
    }

    pub fn omega_uv(&self) -> f64 {
        self.channels.iter().fold(0.0, |m, c| m.max(c.psd.omega_uv()))
    }

    /// `max_{mu,nu,omega} |S_{mu nu}(omega)|`.
    pub fn max_density(&self) -> f64 {
        self.channels.iter().fold(0.0, |m, c| m.max(c.psd.max_density()))
    }

    /// Cross spectrum implied by shared draws: `rho_{mu nu} sqrt(S_mu S_nu)`.
    pub fn cross_density(&self, mu: usize, nu: usize, omega: f64) -> f64 {
        let c = self.cross_correlation[(mu, nu)];
        if c == 0.0 {
            return 0.0;
        }
        c * (self.channels[mu].psd.density(omega) * self.channels[nu].psd.density(omega)).sqrt()
    }

    /// Continuous cross-covariance `C_{mu nu}(t)`.
    pub fn covariance(&self, mu: usize, nu: usize, t: f64) -> f64 {
        let c = self.cross_correlation[(mu, nu)];
        if c == 0.0 {
            return 0.0;
        }
        let (a, b) = (&self.channels[mu].psd, &self.channels[nu].psd);
        if a == b {
            return c * autocorrelation(a, t);
        }
        let (la, ha) = a.band();
        let (lb, hb) = b.band();
        let (lo, hi) = (la.max(lb), ha.min(hb));
        if hi <= lo {
            return 0.0;
        }
        let panels = 32 + (4.0 * (hi - lo) * t.abs() / PI).ceil() as usize;
        let tol = 1e-12 * (a.max_density() * b.max_density()).sqrt() * (hi - lo);
        adaptive_simpson(|w| self.cross_density(mu, nu, w) * (w * t).cos(), lo, hi, panels, tol) / PI
    }

    /// Reject correlations between channels that preserve the symmetry and
    /// channels that break it.
    pub fn validate_symmetry_split(&self, basis: &QBasis, tol: f64) -> Result<()> {
        let preserving = self
            .channels
            .iter()
            .map(|c| classify_operator(&traceless(&c.operator), basis, tol).map(|s| s.symmetry_preserving))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..self.len() {
            for j in 0..i {
                if preserving[i] != preserving[j] && self.cross_correlation[(i, j)].abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "channels {j} and {i} mix symmetry-preserving and symmetry-breaking noise with correlation {}",
                        self.cross_correlation[(i, j)]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Copy with every spectrum multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> NoiseModel {
        NoiseModel {
            channels: self
                .channels
                .iter()
                .map(|c| NoiseChannel { operator: c.operator.clone(), psd: c.psd.scaled(factor) })
                .collect(),
            cross_correlation: self.cross_correlation.clone(),
        }
    }
}

pub(crate) fn traceless(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let shift = a.trace() / num_complex::Complex64::new(n as f64, 0.0);
    a - CMatrix::identity(n, n) * shift
}

/// One realisation of the channel amplitudes on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub seed: u64,
    /// `samples[mu][k] = beta_mu(t_k)`, `k = 0..=steps`.
    pub samples: Vec<Vec<f64>>,
    /// `midpoints[mu][k] = beta_mu(t_k + dt/2)`, `k = 0..steps`.
    pub midpoints: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Columnar text dump: `t beta_0 beta_1 ...` per grid time.
    pub fn write_columns<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "# t")?;
        for mu in 0..self.samples.len() {
            write!(out, " beta_{mu}")?;
        }
        writeln!(out)?;
        for k in 0..=self.grid.steps {
            write!(out, "{}", self.grid.time(k))?;
            for ch in &self.samples {
                write!(out, " {}", ch[k])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-trajectory seed; depends only on `(master, index)`.
pub fn trajectory_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

/// Precomputed harmonic-superposition synthesiser for one model and grid.
///
/// All channels share one midpoint frequency grid covering the union of the
/// bands. Channels with identical spectra and unit mutual correlation are
/// driven by the same draws, so their samples are bit-identical.
#[derive(Debug, Clone)]
pub struct SynthesisPlan {
    grid: TimeGrid,
    omegas: Vec<f64>,
    d_omega: f64,
    group_of: Vec<usize>,
    /// `sqrt(S_g(omega_m) d_omega / pi)` per group.
    amplitudes: Vec<Vec<f64>>,
    group_correlation: RMatrix,
    mixing: RMatrix,
    /// Columns: `cos(omega_m t)` then `sin(omega_m t)`; rows: grid times.
    table_grid: RMatrix,
    table_mid: RMatrix,
}

impl SynthesisPlan {
    /// `modes = None` selects [`DEFAULT_MODES`]; the count is raised when
    /// needed so that the mode spacing stays below `pi / T`.
    pub fn new(model: &NoiseModel, grid: TimeGrid, modes: Option<usize>) -> Result<Self> {
        let omega_uv = model.omega_uv();
        let limit = PI / omega_uv;
        if grid.dt >= limit {
            return Err(Error::Nyquist { dt: grid.dt, limit });
        }
        if grid.steps < 2 {
            return Err(Error::GridMismatch("noise synthesis needs at least 2 steps".into()));
        }

        let lo = model.channels.iter().fold(f64::INFINITY, |m, c| m.min(c.psd.band().0));
        let hi = omega_uv;
        let needed = ((hi - lo) * grid.duration() / PI).ceil() as usize;
        let modes = modes.unwrap_or(DEFAULT_MODES).max(needed).max(1);
        let d_omega = (hi - lo) / modes as f64;
        let omegas: Vec<f64> = (0..modes).map(|m| lo + (m as f64 + 0.5) * d_omega).collect();

        // Collapse exactly correlated channels with identical spectra.
        let m = model.len();
        let mut group_of = vec![usize::MAX; m];
        let mut reps: Vec<usize> = Vec::new();
        for i in 0..m {
            if let Some(g) = reps.iter().position(|&r| {
                model.cross_correlation[(i, r)] == 1.0 && model.channels[i].psd == model.channels[r].psd
            }) {
                group_of[i] = g;
            } else {
                group_of[i] = reps.len();
                reps.push(i);
            }
        }
        let g = reps.len();
        let group_correlation = RMatrix::from_fn(g, g, |a, b| model.cross_correlation[(reps[a], reps[b])]);
        let mixing = psd_sqrt(&group_correlation)?;
        let amplitudes = reps
            .iter()
            .map(|&r| {
                omegas
                    .iter()
                    .map(|&w| (model.channels[r].psd.density(w) * d_omega / PI).sqrt())
                    .collect()
            })
            .collect();

        let table = |times: &[f64]| {
            RMatrix::from_fn(times.len(), 2 * modes, |k, c| {
                if c < modes {
                    (omegas[c] * times[k]).cos()
                } else {
                    (omegas[c - modes] * times[k]).sin()
                }
            })
        };
        let table_grid = table(&grid.times());
        let table_mid = table(&grid.midpoints());

        Ok(SynthesisPlan {
            grid,
            omegas,
            d_omega,
            group_of,
            amplitudes,
            group_correlation,
            mixing,
            table_grid,
            table_mid,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn modes(&self) -> usize {
        self.omegas.len()
    }

    pub fn mode_frequencies(&self) -> &[f64] {
        &self.omegas
    }

    pub fn mode_spacing(&self) -> f64 {
        self.d_omega
    }

    pub fn channel_count(&self) -> usize {
        self.group_of.len()
    }

    /// Covariance of the synthesised amplitudes,
    /// `E[beta_mu(t + s) beta_nu(t)] = rho_{mu nu} sum_m a_mu,m a_nu,m cos(omega_m s)`.
    pub fn realized_covariance(&self, mu: usize, nu: usize, s: f64) -> f64 {
        let (g, h) = (self.group_of[mu], self.group_of[nu]);
        let c = self.group_correlation[(g, h)];
        if c == 0.0 {
            return 0.0;
        }
        let sum: f64 = self
            .omegas
            .iter()
            .zip(self.amplitudes[g].iter().zip(&self.amplitudes[h]))
            .map(|(w, (a, b))| a * b * (w * s).cos())
            .sum();
        c * sum
    }

    /// Draw a trajectory. `negate` flips the sign of every Gaussian draw
    /// (antithetic partner of the same seed).
    pub fn sample(&self, seed: u64, negate: bool) -> Trajectory {
        let modes = self.modes();
        let groups = self.amplitudes.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sign = if negate { -1.0 } else { 1.0 };
        let mut z = RMatrix::zeros(groups, 2 * modes);
        for g in 0..groups {
            for c in 0..2 * modes {
                let v: f64 = rng.sample(StandardNormal);
                z[(g, c)] = sign * v;
            }
        }
        let w = if groups == 1 { z } else { &self.mixing * z };

        let mut grid_rows = Vec::with_capacity(groups);
        let mut mid_rows = Vec::with_capacity(groups);
        for g in 0..groups {
            let amp = &self.amplitudes[g];
            let coeffs = DVector::from_fn(2 * modes, |c, _| amp[c % modes] * w[(g, c)]);
            grid_rows.push((&self.table_grid * &coeffs).as_slice().to_vec());
            mid_rows.push((&self.table_mid * &coeffs).as_slice().to_vec());
        }
        Trajectory {
            grid: self.grid,
            seed,
            samples: self.group_of.iter().map(|&g| grid_rows[g].clone()).collect(),
            midpoints: self.group_of.iter().map(|&g| mid_rows[g].clone()).collect(),
        }
    }
}

/// Draw a single trajectory with the default mode count.
pub fn sample_trajectory(model: &NoiseModel, grid: TimeGrid, seed: u64) -> Result<Trajectory> {
    Ok(SynthesisPlan::new(model, grid, None)?.sample(seed, false))
}

/// Symmetric square root of a positive semidefinite matrix.
fn psd_sqrt(a: &RMatrix) -> Result<RMatrix> {
    let n = a.nrows();
    if n == 1 {
        return Ok(RMatrix::from_element(1, 1, a[(0, 0)].max(0.0).sqrt()));
    }
    let eig = a.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -1e-10 {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
    }
    let d = RMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}
