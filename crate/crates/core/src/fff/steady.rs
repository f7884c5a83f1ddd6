use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::coherence::NoiseClass;
use super::cumulant::{hermitize, CumulantSuperoperator};
use crate::basis::{Block, QBasis};
use crate::error::{Error, Result};
use crate::operator::{general_eigenvalues, trace_distance, CMatrix, RMatrix};

/// Decay horizon: the extrapolated state is `exp(s C) rho` with
/// `s = HORIZON / gap`.
pub const HORIZON: f64 = 60.0;

/// Long-time limit of `exp(s C)` and the kernel structure behind it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteadyStateReport {
    pub noise_class: NoiseClass,
    pub sector: usize,
    /// Extrapolated state.
    #[serde(skip)]
    pub state: CMatrix,
    #[serde(skip)]
    pub expected: CMatrix,
    /// Trace distance between the extrapolated and the expected state.
    pub distance_to_expected: f64,
    /// Trace distance between the extrapolation and the orthogonal
    /// projection onto `ker C`.
    pub projection_mismatch: f64,
    pub kernel_dim: usize,
    /// Kernel dimension inside the directions reachable from the sector.
    pub reachable_kernel_dim: usize,
    pub expected_kernel_dim: usize,
    /// Slowest nonzero decay rate `min(-Re lambda)`.
    pub spectral_gap: f64,
    pub extrapolation_time: f64,
    /// Nonzero eigenvalues with vanishing real part.
    pub oscillatory_modes: usize,
    pub extra_conserved: bool,
}

/// Kernel of `a`: eigenvectors of `a^T a` with eigenvalue below
/// `(tol * scale)^2`.
fn null_space(a: &RMatrix, scale: f64, tol: f64) -> Vec<DVector<f64>> {
    let n = a.ncols();
    let ata = a.transpose() * a;
    let eig = ata.symmetric_eigen();
    let cut = (tol * scale).powi(2);
    (0..n)
        .filter(|&k| eig.eigenvalues[k].abs() <= cut)
        .map(|k| eig.eigenvectors.column(k).clone_owned())
        .collect()
}

/// Expected steady state: the normalised sector projector for preserving
/// noise, the maximally mixed state otherwise.
pub fn expected_steady_state(basis: &QBasis, sector: usize, noise_class: NoiseClass) -> CMatrix {
    let n = basis.dim();
    match noise_class {
        NoiseClass::Preserving => {
            let d = basis.spectrum.multiplicities[sector] as f64;
            basis.spectrum.projector(sector) / Complex64::new(d, 0.0)
        }
        NoiseClass::Breaking => CMatrix::identity(n, n) / Complex64::new(n as f64, 0.0),
    }
}

/// Extrapolate `exp(s C) rho_0(T)` to `s -> infinity` and cross-check it
/// against the kernel of `C`.
pub fn steady_state(
    c: &CumulantSuperoperator,
    basis: &QBasis,
    sector: usize,
    noise_class: NoiseClass,
    rho0_t: &CMatrix,
) -> Result<SteadyStateReport> {
    if sector >= basis.spectrum.sector_count() {
        return Err(Error::Config(format!("sector {sector} out of range")));
    }
    let full = c.matrix();
    let n2 = full.nrows();
    let norm = full.amax();
    let v = basis.to_liouville(rho0_t);
    let expected = expected_steady_state(basis, sector, noise_class);

    if norm == 0.0 {
        return Ok(SteadyStateReport {
            noise_class,
            sector,
            state: rho0_t.clone(),
            distance_to_expected: trace_distance(rho0_t, &expected)?,
            expected,
            projection_mismatch: 0.0,
            kernel_dim: n2,
            reachable_kernel_dim: n2,
            expected_kernel_dim: 1,
            spectral_gap: 0.0,
            extrapolation_time: 0.0,
            oscillatory_modes: 0,
            extra_conserved: true,
        });
    }

    let eig = general_eigenvalues(&full)
        .ok_or_else(|| Error::Invariant("eigenvalues of the cumulant did not converge".into()))?;
    let zero = 1e-9 * norm;
    let mut gap = f64::INFINITY;
    let mut oscillatory = 0;
    for z in eig.iter() {
        if z.norm() <= zero {
            continue;
        }
        if -z.re <= zero {
            oscillatory += 1;
        } else {
            gap = gap.min(-z.re);
        }
    }
    let s = if gap.is_finite() { HORIZON / gap } else { 0.0 };
    let limit = (&full * s).exp() * &v;
    let state = hermitize(&basis.from_liouville(&limit));

    let spectral = full.norm();
    let kernel = null_space(&full, spectral, 1e-7);
    let mut projection = DVector::zeros(n2);
    for k in &kernel {
        projection += k * k.dot(&v);
    }
    let projected = hermitize(&basis.from_liouville(&projection));

    // Directions reachable from a state in the sector.
    let reachable: Vec<usize> = match noise_class {
        NoiseClass::Preserving => std::iter::once(0)
            .chain(basis.labels.iter().enumerate().filter_map(|(i, l)| {
                matches!(l.block(), Block::Center)
                    .then_some(i + 1)
                    .or_else(|| (l.block() == Block::Sector { sector }).then_some(i + 1))
            }))
            .collect(),
        NoiseClass::Breaking => (0..n2).collect(),
    };
    let columns = RMatrix::from_fn(n2, reachable.len(), |r, c| full[(r, reachable[c])]);
    let reachable_kernel_dim = null_space(&columns, spectral, 1e-7).len();
    let expected_kernel_dim = match noise_class {
        NoiseClass::Preserving => basis.spectrum.sector_count(),
        NoiseClass::Breaking => 1,
    };

    Ok(SteadyStateReport {
        noise_class,
        sector,
        distance_to_expected: trace_distance(&state, &expected)?,
        projection_mismatch: trace_distance(&state, &projected)?,
        state,
        expected,
        kernel_dim: kernel.len(),
        reachable_kernel_dim,
        expected_kernel_dim,
        spectral_gap: if gap.is_finite() { gap } else { 0.0 },
        extrapolation_time: s,
        oscillatory_modes: oscillatory,
        extra_conserved: reachable_kernel_dim > expected_kernel_dim,
    })
}
