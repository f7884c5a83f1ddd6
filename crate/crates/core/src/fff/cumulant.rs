use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::coherence::{CoherenceParams, NoiseClass};
use crate::basis::{Block, Label, QBasis};
use crate::error::{Error, Result};
use crate::operator::{general_eigenvalues, hs_coefficient, CMatrix, RMatrix};

/// Second-order cumulant `C = sum_ij chi1_ij [x_i,[x_j,.]] + chi2_ij [[x_i,x_j],.]`
/// in the Liouville representation of the Q-basis (index 0 is the identity).
#[derive(Debug, Clone)]
pub struct CumulantSuperoperator {
    pub chi1: RMatrix,
    pub chi2: RMatrix,
    /// Liouville matrix of the `chi1` part (symmetric).
    pub sym: RMatrix,
    /// Liouville matrix of the `chi2` part (antisymmetric).
    pub asym: RMatrix,
}

impl CumulantSuperoperator {
    pub fn matrix(&self) -> RMatrix {
        &self.sym + &self.asym
    }

    pub fn dim(&self) -> usize {
        self.sym.nrows()
    }

    /// Largest absolute Liouville entry.
    pub fn max_entry(&self) -> f64 {
        self.matrix().amax()
    }

    pub fn is_zero(&self) -> bool {
        self.max_entry() == 0.0
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.matrix() * v
    }

    /// `exp(s C)`.
    pub fn propagator(&self, s: f64) -> RMatrix {
        (self.matrix() * s).exp()
    }
}

fn liouville_of<F>(basis: &QBasis, map: F) -> RMatrix
where
    F: Fn(&CMatrix) -> CMatrix,
{
    let lb = basis.liouville_basis();
    let n = lb.len();
    let mut out = RMatrix::zeros(n, n);
    for (l, x) in lb.iter().enumerate() {
        let y = map(x);
        for (k, xk) in lb.iter().enumerate() {
            out[(k, l)] = hs_coefficient(xk, &y);
        }
    }
    out
}

fn check_chi(chi: &RMatrix, d: usize) -> Result<()> {
    if chi.nrows() != d || chi.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: chi.nrows() });
    }
    Ok(())
}

/// Assemble the cumulant. `chi1` is symmetrised and `chi2` antisymmetrised
/// before use.
///
/// The `chi1` part is evaluated as `M X + X M - 2 sum_a l_a K_a X K_a` with
/// `M = sum chi1_ij x_i x_j` and `chi1 = sum_a l_a v_a v_a^T`,
/// `K_a = sum_i v_ai x_i`; the `chi2` part as `[H2, X]` with
/// `H2 = sum chi2_ij [x_i, x_j]`.
pub fn assemble_cumulant(params: &CoherenceParams, basis: &QBasis) -> Result<CumulantSuperoperator> {
    let d = basis.len();
    check_chi(&params.chi1, d)?;
    check_chi(&params.chi2, d)?;
    let chi1 = (&params.chi1 + params.chi1.transpose()) * 0.5;
    let chi2 = (&params.chi2 - params.chi2.transpose()) * 0.5;
    let gens = basis.generators();
    let n = basis.dim();
    let active: Vec<usize> = (0..d)
        .filter(|&i| chi1.row(i).iter().chain(chi2.row(i).iter()).any(|v| *v != 0.0))
        .collect();

    let sub = RMatrix::from_fn(active.len(), active.len(), |a, b| chi1[(active[a], active[b])]);
    let mut m = CMatrix::zeros(n, n);
    let mut kraus: Vec<(f64, CMatrix)> = Vec::new();
    if !active.is_empty() {
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                if sub[(a, b)] != 0.0 {
                    m += &gens[i] * &gens[j] * Complex64::new(sub[(a, b)], 0.0);
                }
            }
        }
        let eig = sub.symmetric_eigen();
        for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda == 0.0 {
                continue;
            }
            let mut k = CMatrix::zeros(n, n);
            for (a, &i) in active.iter().enumerate() {
                k += &gens[i] * Complex64::new(eig.eigenvectors[(a, c)], 0.0);
            }
            kraus.push((lambda, k));
        }
    }
    let sym = liouville_of(basis, |x| {
        let mut y = &m * x + x * &m;
        for (lambda, k) in &kraus {
            y -= k * x * k * Complex64::new(2.0 * lambda, 0.0);
        }
        y
    });

    let mut h2 = CMatrix::zeros(n, n);
    for &i in &active {
        for &j in &active {
            if chi2[(i, j)] != 0.0 {
                let c = &gens[i] * &gens[j] - &gens[j] * &gens[i];
                h2 += c * Complex64::new(chi2[(i, j)], 0.0);
            }
        }
    }
    let asym = liouville_of(basis, |x| &h2 * x - x * &h2);
    Ok(CumulantSuperoperator { chi1, chi2, sym, asym })
}

/// Term-by-term `sum chi1_ij L([x_i,[x_j,.]]) + chi2_ij L([[x_i,x_j],.])`;
/// quadratic in the basis size, meant for cross-checking small systems.
pub fn assemble_cumulant_literal(params: &CoherenceParams, basis: &QBasis) -> RMatrix {
    let gens = basis.generators();
    let d = gens.len();
    liouville_of(basis, |x| {
        let mut y = CMatrix::zeros(x.nrows(), x.ncols());
        for i in 0..d {
            for j in 0..d {
                let (a, b) = (params.chi1[(i, j)], params.chi2[(i, j)]);
                if a == 0.0 && b == 0.0 {
                    continue;
                }
                let inner = &gens[j] * x - x * &gens[j];
                let double = &gens[i] * &inner - &inner * &gens[i];
                let comm = &gens[i] * &gens[j] - &gens[j] * &gens[i];
                let outer = &comm * x - x * &comm;
                y += double * Complex64::new(a, 0.0) + outer * Complex64::new(b, 0.0);
            }
        }
        y
    })
}

/// Spectral properties of the two cumulant parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Largest eigenvalue of the symmetric part (should be <= 0).
    pub max_sym_eigenvalue: f64,
    /// Spectral norm of the symmetric part.
    pub sym_norm: f64,
    /// Largest entry of the identity row and column of `C`.
    pub identity_residual: f64,
    /// Largest `|Re lambda|` among eigenvalues of the antisymmetric part.
    pub max_asym_real: f64,
    pub asym_norm: f64,
    /// Asymmetry of the `chi1` Liouville matrix, `max |S - S^T|`.
    pub sym_asymmetry: f64,
}

pub fn spectrum_report(c: &CumulantSuperoperator) -> SpectrumReport {
    let eig = c.sym.clone().symmetric_eigenvalues();
    let sym_norm = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let full = c.matrix();
    let n = full.nrows();
    let mut identity_residual = 0.0f64;
    for k in 0..n {
        identity_residual = identity_residual.max(full[(k, 0)].abs()).max(full[(0, k)].abs());
    }
    let (max_asym_real, asym_norm) = match general_eigenvalues(&c.asym) {
        Some(ev) => (ev.iter().fold(0.0f64, |m, z| m.max(z.re.abs())), ev.iter().fold(0.0f64, |m, z| m.max(z.norm()))),
        None => (f64::NAN, f64::NAN),
    };
    SpectrumReport {
        max_sym_eigenvalue: eig.max(),
        sym_norm,
        identity_residual,
        max_asym_real,
        asym_norm,
        sym_asymmetry: (&c.sym - c.sym.transpose()).amax(),
    }
}

/// Liouville block of every basis direction (the identity counts as center).
fn liouville_blocks(basis: &QBasis) -> Vec<Block> {
    std::iter::once(Block::Center).chain(basis.labels.iter().map(|l| l.block())).collect()
}

/// Result of the structural test on the cumulant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    pub noise_class: NoiseClass,
    pub sector: usize,
    pub max_entry: f64,
    /// Largest forbidden entry.
    pub max_violation: f64,
    pub relative: f64,
    /// Largest coupling from sector-`q` directions onto ladder directions.
    pub ladder_leakage: f64,
    /// Largest coupling from sector-`q` directions onto `Within(q')`, `q' != q`.
    pub foreign_within_leakage: f64,
    /// Up to 20 forbidden `(k, l, C_kl)` Liouville entries.
    pub violations: Vec<(usize, usize, f64)>,
    pub passed: bool,
}

/// Check the block structure of `C`.
///
/// Preserving noise: `C` must not couple different invariant blocks.
/// Breaking noise: the image of sector-`q` directions must lie in the Cartan
/// directions plus `Within(q)`.
pub fn structure_check(
    c: &CumulantSuperoperator,
    basis: &QBasis,
    noise_class: NoiseClass,
    sector: usize,
    tol: f64,
) -> StructureReport {
    let full = c.matrix();
    let n = full.nrows();
    let max_entry = full.amax();
    let blocks = liouville_blocks(basis);
    let labels: Vec<Option<Label>> = std::iter::once(None).chain(basis.labels.iter().map(|l| Some(*l))).collect();
    let source = Block::Sector { sector };
    let mut violations = Vec::new();
    let mut ladder_leakage = 0.0f64;
    let mut foreign_within_leakage = 0.0f64;
    for l in 0..n {
        for k in 0..n {
            let v = full[(k, l)];
            if v == 0.0 {
                continue;
            }
            let forbidden = match noise_class {
                NoiseClass::Preserving => blocks[k] != blocks[l],
                NoiseClass::Breaking => {
                    if blocks[l] != source {
                        false
                    } else {
                        match labels[k] {
                            None | Some(Label::Cartan { .. }) => false,
                            Some(Label::Within { sector: s, .. }) => s != sector,
                            Some(Label::Ladder { .. }) => true,
                        }
                    }
                }
            };
            if blocks[l] == source {
                match labels[k] {
                    Some(Label::Ladder { .. }) => ladder_leakage = ladder_leakage.max(v.abs()),
                    Some(Label::Within { sector: s, .. }) if s != sector => {
                        foreign_within_leakage = foreign_within_leakage.max(v.abs())
                    }
                    _ => {}
                }
            }
            if forbidden {
                violations.push((k, l, v));
            }
        }
    }
    let max_violation = violations.iter().fold(0.0f64, |m, e| m.max(e.2.abs()));
    let relative = if max_entry > 0.0 { max_violation / max_entry } else { 0.0 };
    violations.retain(|e| e.2.abs() > tol * max_entry);
    violations.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()));
    violations.truncate(20);
    StructureReport {
        noise_class,
        sector,
        max_entry,
        max_violation,
        relative,
        ladder_leakage,
        foreign_within_leakage,
        passed: relative <= tol,
        violations,
    }
}

/// `exp(C)[rho_0(T)]`, re-Hermitised.
pub fn predict_average_state(c: &CumulantSuperoperator, rho0_t: &CMatrix, basis: &QBasis) -> CMatrix {
    let v = basis.to_liouville(rho0_t);
    hermitize(&basis.from_liouville(&(c.propagator(1.0) * v)))
}

/// `rho_0(T) + C[rho_0(T)]`.
pub fn predict_first_order(c: &CumulantSuperoperator, rho0_t: &CMatrix, basis: &QBasis) -> CMatrix {
    let v = basis.to_liouville(rho0_t);
    let w = &v + c.apply(&v);
    hermitize(&basis.from_liouville(&w))
}

/// `C[rho]` as an operator.
pub fn apply_to_state(c: &CumulantSuperoperator, rho: &CMatrix, basis: &QBasis) -> CMatrix {
    hermitize(&basis.from_liouville(&c.apply(&basis.to_liouville(rho))))
}

pub(crate) fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}
