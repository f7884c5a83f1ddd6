use serde::{Deserialize, Serialize};

use crate::basis::{Block, QBasis};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::noise::{traceless, NoiseModel};
use crate::operator::{hs_coefficient, RMatrix};
use crate::propagation::PropagatorCache;

/// Toggling-frame expansion of the noise operators,
/// `r[mu][(k, i)] = Tr(x_i U_0(T, t_k) N_mu U_0(T, t_k)^dag)`.
#[derive(Debug, Clone)]
pub struct ControlMatrix {
    pub grid: TimeGrid,
    /// One `(steps + 1) x (N^2 - 1)` matrix per channel.
    pub r: Vec<RMatrix>,
}

impl ControlMatrix {
    pub fn generators(&self) -> usize {
        self.r[0].ncols()
    }

    pub fn channels(&self) -> usize {
        self.r.len()
    }

    pub fn max_entry(&self) -> f64 {
        self.r.iter().fold(0.0, |m, r| m.max(r.amax()))
    }
}

/// Reject propagators that mix Q's sectors.
fn check_commutes(cache: &PropagatorCache, basis: &QBasis) -> Result<()> {
    let spec = &basis.spectrum;
    let ranges = spec.ranges();
    let mut steps = Vec::new();
    let mut worst = 0.0f64;
    for (k, u) in cache.anchored.iter().enumerate() {
        let w = spec.to_eigenbasis(u);
        let mut dev = 0.0f64;
        for (s, rs) in ranges.iter().enumerate() {
            for (t, rt) in ranges.iter().enumerate() {
                if s != t {
                    for a in rs.clone() {
                        for b in rt.clone() {
                            dev = dev.max(w[(a, b)].norm());
                        }
                    }
                }
            }
        }
        worst = worst.max(dev);
        if dev > 1e-9 {
            steps.push(k);
        }
    }
    if steps.is_empty() {
        Ok(())
    } else {
        Err(Error::SymmetryViolation { steps, max_deviation: worst })
    }
}

/// Control matrix of every channel on the cached grid. Fails when the ideal
/// propagators do not commute with the basis' symmetry operator.
pub fn control_matrix(cache: &PropagatorCache, basis: &QBasis, model: &NoiseModel) -> Result<ControlMatrix> {
    if model.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: model.dim() });
    }
    check_commutes(cache, basis)?;
    let gens = basis.generators();
    let steps = cache.grid.steps;
    let r = model
        .channels
        .iter()
        .map(|ch| {
            let n = traceless(&ch.operator);
            let mut out = RMatrix::zeros(steps + 1, gens.len());
            for (k, u) in cache.anchored.iter().enumerate() {
                let toggled = u * &n * u.adjoint();
                for (i, x) in gens.iter().enumerate() {
                    out[(k, i)] = hs_coefficient(x, &toggled);
                }
            }
            out
        })
        .collect();
    Ok(ControlMatrix { grid: cache.grid, r })
}

/// Full square form `R_ij(t_k) = Tr(x_i U x_j U^dag)` with `U = U_0(T, t_k)`.
pub fn square_form(cache: &PropagatorCache, basis: &QBasis, k: usize) -> RMatrix {
    let gens = basis.generators();
    let u = &cache.anchored[k];
    let mut out = RMatrix::zeros(gens.len(), gens.len());
    for (j, xj) in gens.iter().enumerate() {
        let toggled = u * xj * u.adjoint();
        for (i, xi) in gens.iter().enumerate() {
            out[(i, j)] = hs_coefficient(xi, &toggled);
        }
    }
    out
}

/// Cross-block entries of the square control matrix over the whole grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockCheck {
    pub max_entry: f64,
    pub max_cross: f64,
    /// `max_cross / max_entry`.
    pub relative: f64,
    /// Largest deviation of `R R^T` from the identity.
    pub orthogonality: f64,
    /// Up to 20 offending `(k, i, j, value)` entries.
    pub offending: Vec<(usize, usize, usize, f64)>,
    pub passed: bool,
}

/// Verify that the square control matrix never couples different invariant
/// blocks, to `tol` relative to its largest entry.
pub fn check_block_structure(cache: &PropagatorCache, basis: &QBasis, tol: f64) -> BlockCheck {
    let blocks: Vec<Block> = basis.labels.iter().map(|l| l.block()).collect();
    let d = blocks.len();
    let mut max_entry = 0.0f64;
    let mut max_cross = 0.0f64;
    let mut orthogonality = 0.0f64;
    let mut cross: Vec<(usize, usize, usize, f64)> = Vec::new();
    for k in 0..=cache.grid.steps {
        let r = square_form(cache, basis, k);
        let rrt = &r * r.transpose();
        orthogonality = orthogonality.max((rrt - RMatrix::identity(d, d)).amax());
        max_entry = max_entry.max(r.amax());
        for i in 0..d {
            for j in 0..d {
                if blocks[i] != blocks[j] {
                    let v = r[(i, j)].abs();
                    max_cross = max_cross.max(v);
                    if v > tol * 1e-3 {
                        cross.push((k, i, j, r[(i, j)]));
                    }
                }
            }
        }
    }
    let threshold = tol * max_entry;
    let mut offending: Vec<_> = cross.into_iter().filter(|e| e.3.abs() > threshold).collect();
    offending.sort_by(|a, b| b.3.abs().total_cmp(&a.3.abs()));
    offending.truncate(20);
    BlockCheck {
        max_entry,
        max_cross,
        relative: max_cross / max_entry.max(1e-300),
        orthogonality,
        passed: max_cross <= threshold,
        offending,
    }
}

/// Largest `|r|` on ladder generators over all channels and times.
pub fn ladder_amplitude(cm: &ControlMatrix, basis: &QBasis) -> f64 {
    let mut m = 0.0f64;
    for r in &cm.r {
        for (i, l) in basis.labels.iter().enumerate() {
            if l.is_ladder() {
                m = m.max(r.column(i).amax());
            }
        }
    }
    m
}
