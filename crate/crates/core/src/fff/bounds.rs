use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coherence::{trapezoid_weights, FilterFunctions};
use super::cumulant::{apply_to_state, predict_average_state, CumulantSuperoperator};
use crate::basis::{centralizer_dims, Label, QBasis};
use crate::noise::NoiseModel;
use crate::operator::{trace_norm, CMatrix, RMatrix};

/// Measured distances and the weak-noise bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub sector: usize,
    /// `(1/2) ||C[rho_0(T)]||_1`.
    pub distance: f64,
    /// `(1/2) ||exp(C)[rho_0(T)] - rho_0(T)||_1`.
    pub distance_exponential: f64,
    /// Sum of `psi` over Cartan and `Within(q)` index pairs.
    pub psi_symmetric: f64,
    /// Sum of `psi` over index pairs inside one `Ladder(q, q')` class.
    pub psi_nonsymmetric: f64,
    /// Remaining index pairs (mixed classes, other sectors).
    pub psi_cross: f64,
    pub psi_all: f64,
    /// `psi_symmetric + psi_nonsymmetric`.
    pub overlap_bound: f64,
    /// `2 S0 T (N_q^4 + sum_q' N_qq'^4)`.
    pub white_noise_bound: f64,
    /// `max_omega S(omega)` over all channels.
    pub s0: f64,
    pub duration: f64,
    pub n_q: usize,
    /// `(q', N_qq')` for every other sector.
    pub n_qq: Vec<(usize, usize)>,
}

/// `psi^{gh}_ij = int dw/2pi S_gh (|F^{gh}_ij| + |G^{gh}_ij|)`, summed over
/// channel pairs, on the active generators.
pub fn overlap_terms(ffs: &FilterFunctions, model: &NoiseModel) -> RMatrix {
    let act = &ffs.channels.active;
    let na = act.len();
    let d = ffs.rtilde.first().map(|r| r.ncols()).unwrap_or(0);
    let mut out = RMatrix::zeros(d, d);
    if na == 0 {
        return out;
    }
    let weights = trapezoid_weights(&ffs.omega);
    let groups = ffs.groups();
    let mut pairs = Vec::new();
    for g in 0..groups {
        for h in 0..groups {
            let (mu, nu) = (ffs.channels.representative(g), ffs.channels.representative(h));
            if model.cross_correlation[(mu, nu)] != 0.0 {
                pairs.push((g, h, mu, nu));
            }
        }
    }
    let parts: Vec<RMatrix> = pairs
        .par_iter()
        .map(|&(g, h, mu, nu)| {
            let mut acc = RMatrix::zeros(na, na);
            for (w, &omega) in ffs.omega.iter().enumerate() {
                let s = model.cross_density(mu, nu, omega).abs() * weights[w] / (2.0 * PI);
                if s == 0.0 {
                    continue;
                }
                let a: Vec<f64> = act.iter().map(|&i| ffs.rtilde[g][(w, i)].norm()).collect();
                let b: Vec<f64> = act.iter().map(|&j| ffs.rtilde[h][(w, j)].norm()).collect();
                let second = ffs.second_order_active(g, h, w);
                for x in 0..na {
                    for y in 0..na {
                        acc[(x, y)] += s * (a[x] * b[y] + second[(x, y)].abs());
                    }
                }
            }
            acc
        })
        .collect();
    let sum = parts.into_iter().fold(RMatrix::zeros(na, na), |a, p| a + p);
    for (x, &i) in act.iter().enumerate() {
        for (y, &j) in act.iter().enumerate() {
            out[(i, j)] = sum[(x, y)];
        }
    }
    out
}

/// Distances between ideal and noisy states plus the overlap and white-noise
/// bounds for a state living in `sector`.
pub fn distance_and_bounds(
    c: &CumulantSuperoperator,
    rho0_t: &CMatrix,
    ffs: &FilterFunctions,
    model: &NoiseModel,
    basis: &QBasis,
    sector: usize,
) -> BoundReport {
    let distance = 0.5 * trace_norm(&apply_to_state(c, rho0_t, basis));
    let distance_exponential = 0.5 * trace_norm(&(predict_average_state(c, rho0_t, basis) - rho0_t));

    let psi = overlap_terms(ffs, model);
    let labels = &basis.labels;
    let symmetric: Vec<usize> = (0..labels.len())
        .filter(|&i| match labels[i] {
            Label::Cartan { .. } => true,
            Label::Within { sector: s, .. } => s == sector,
            Label::Ladder { .. } => false,
        })
        .collect();
    let sectors = basis.spectrum.sector_count();
    let ladder_sets: Vec<(usize, Vec<usize>)> = (0..sectors)
        .filter(|&q| q != sector)
        .map(|q| {
            let set = (0..labels.len())
                .filter(|&i| match labels[i] {
                    Label::Ladder { from, to, .. } => (from == sector && to == q) || (from == q && to == sector),
                    _ => false,
                })
                .collect();
            (q, set)
        })
        .collect();
    let block_sum = |set: &[usize]| -> f64 { set.iter().flat_map(|&i| set.iter().map(move |&j| (i, j))).map(|p| psi[p]).sum() };
    let psi_symmetric = block_sum(&symmetric);
    let psi_nonsymmetric: f64 = ladder_sets.iter().map(|(_, s)| block_sum(s)).sum();
    let psi_all = psi.sum();

    let dims = centralizer_dims(basis);
    let n_q = dims.within(sector);
    let n_qq: Vec<(usize, usize)> = ladder_sets.iter().map(|(q, s)| (*q, s.len())).collect();
    let s0 = model.max_density();
    let duration = ffs.channels.grid.duration();
    let quartic = (n_q as f64).powi(4) + n_qq.iter().map(|(_, m)| (*m as f64).powi(4)).sum::<f64>();

    BoundReport {
        sector,
        distance,
        distance_exponential,
        psi_symmetric,
        psi_nonsymmetric,
        psi_cross: psi_all - psi_symmetric - psi_nonsymmetric,
        psi_all,
        overlap_bound: psi_symmetric + psi_nonsymmetric,
        white_noise_bound: 2.0 * s0 * duration * quartic,
        s0,
        duration,
        n_q,
        n_qq,
    }
}
