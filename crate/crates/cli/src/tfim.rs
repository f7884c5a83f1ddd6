use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use symnoise_core::grid::TimeGrid;
use symnoise_core::noise::{NoiseChannel, NoiseModel, PsdSpec};
use symnoise_core::operator::{embed_qubit_operator, pauli_x, pauli_y, pauli_z};
use symnoise_core::propagation::Schedule;
use symnoise_core::{CMatrix, Error, RMatrix, Result};

/// Largest qubit count accepted without `allow_large`.
pub const MAX_QUBITS: usize = 6;

/// Ising couplings `J_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Couplings {
    /// `J_ij = j` for every pair; commutes with `J^2`.
    AllToAll { j: f64 },
    /// `J_{i,i+1} = j`; commutes with `J^2` only for `n = 2`.
    Chain { j: f64 },
    /// Symmetric matrix with zero diagonal.
    Explicit { matrix: Vec<Vec<f64>> },
}

/// How the evolution time is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DurationMode {
    /// `T = factor * tau`, with `tau` the correlation length of the noise.
    MultipleOfTau { factor: f64 },
    Absolute { t: f64 },
}

/// Transverse-field Ising model `H_0 = sum_{i<j} J_ij Z_i Z_j + h sum_i X_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfimConfig {
    pub n: usize,
    pub couplings: Couplings,
    pub h: f64,
    pub duration: DurationMode,
    /// Time step override.
    pub dt: Option<f64>,
    /// Lift the [`MAX_QUBITS`] guard.
    pub allow_large: bool,
}

impl Default for TfimConfig {
    fn default() -> Self {
        TfimConfig {
            n: 3,
            couplings: Couplings::AllToAll { j: 1.0 },
            h: 1.0,
            duration: DurationMode::MultipleOfTau { factor: 2.0 },
            dt: None,
            allow_large: false,
        }
    }
}

impl TfimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("need at least 2 qubits, got {}", self.n)));
        }
        if self.n > MAX_QUBITS && !self.allow_large {
            return Err(Error::Config(format!(
                "{} qubits exceeds the default limit of {MAX_QUBITS}; set allow_large to override",
                self.n
            )));
        }
        if !self.h.is_finite() {
            return Err(Error::Config("field h must be finite".into()));
        }
        if let Couplings::Explicit { matrix } = &self.couplings {
            if matrix.len() != self.n || matrix.iter().any(|r| r.len() != self.n) {
                return Err(Error::Config(format!("coupling matrix must be {0}x{0}", self.n)));
            }
            for i in 0..self.n {
                if matrix[i][i] != 0.0 {
                    return Err(Error::Config(format!("coupling matrix diagonal entry {i} is nonzero")));
                }
                for j in 0..i {
                    if (matrix[i][j] - matrix[j][i]).abs() > 1e-12 * matrix[i][j].abs().max(1.0) {
                        return Err(Error::Config(format!("coupling matrix is not symmetric at ({i}, {j})")));
                    }
                }
            }
        }
        match self.duration {
            DurationMode::MultipleOfTau { factor } if !(factor > 0.0 && factor.is_finite()) => {
                Err(Error::Config(format!("duration factor must be positive, got {factor}")))
            }
            DurationMode::Absolute { t } if !(t > 0.0 && t.is_finite()) => {
                Err(Error::Config(format!("duration must be positive, got {t}")))
            }
            _ => match self.dt {
                Some(dt) if !(dt > 0.0 && dt.is_finite()) => {
                    Err(Error::Config(format!("time step must be positive, got {dt}")))
                }
                _ => Ok(()),
            },
        }
    }

    pub fn coupling_matrix(&self) -> RMatrix {
        let n = self.n;
        match &self.couplings {
            Couplings::AllToAll { j } => RMatrix::from_fn(n, n, |a, b| if a == b { 0.0 } else { *j }),
            Couplings::Chain { j } => RMatrix::from_fn(n, n, |a, b| if a.abs_diff(b) == 1 { *j } else { 0.0 }),
            Couplings::Explicit { matrix } => RMatrix::from_fn(n, n, |a, b| matrix[a][b]),
        }
    }

    /// `H_0` as a `2^n x 2^n` matrix.
    pub fn hamiltonian(&self) -> CMatrix {
        let n = self.n;
        let j = self.coupling_matrix();
        let z: Vec<CMatrix> = (0..n).map(|i| embed_qubit_operator(&pauli_z(), i, n)).collect();
        let dim = 1 << n;
        let mut h = CMatrix::zeros(dim, dim);
        for a in 0..n {
            for b in a + 1..n {
                if j[(a, b)] != 0.0 {
                    h += &z[a] * &z[b] * Complex64::new(j[(a, b)], 0.0);
                }
            }
            h += embed_qubit_operator(&pauli_x(), a, n) * Complex64::new(self.h, 0.0);
        }
        h
    }
}

/// `J_a = (1/2) sum_i sigma_a^(i)`.
pub fn collective_spin(n: usize, pauli: &CMatrix) -> CMatrix {
    let dim = 1 << n;
    let mut out = CMatrix::zeros(dim, dim);
    for i in 0..n {
        out += embed_qubit_operator(pauli, i, n);
    }
    out * Complex64::new(0.5, 0.0)
}

/// Total spin `J^2 = J_x^2 + J_y^2 + J_z^2`.
pub fn build_j_squared(n: usize) -> CMatrix {
    [pauli_x(), pauli_y(), pauli_z()]
        .iter()
        .map(|p| {
            let j = collective_spin(n, p);
            &j * &j
        })
        .fold(CMatrix::zeros(1 << n, 1 << n), |acc, x| acc + x)
}

/// `J^2` eigenvalue `j (j + 1)` of the fully symmetric sector, `j = n / 2`.
pub fn symmetric_eigenvalue(n: usize) -> f64 {
    let j = n as f64 / 2.0;
    j * (j + 1.0)
}

/// Constant TFIM schedule on `grid`, checked against `J^2`.
pub fn build_tfim(config: &TfimConfig, grid: TimeGrid) -> Result<Schedule> {
    config.validate()?;
    Schedule::constant(grid, config.hamiltonian(), Some(build_j_squared(config.n)))
}

/// Dephasing `H_E = sum_i beta_i(t) Z_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DephasingKind {
    /// One field shared by all qubits.
    Global,
    /// Independent, identically distributed fields.
    Local,
}

pub fn build_dephasing(n: usize, kind: DephasingKind, psd: &PsdSpec) -> Result<NoiseModel> {
    let channels: Vec<NoiseChannel> = (0..n)
        .map(|i| NoiseChannel { operator: embed_qubit_operator(&pauli_z(), i, n), psd: psd.clone() })
        .collect();
    match kind {
        DephasingKind::Global => NoiseModel::fully_correlated(channels),
        DephasingKind::Local => NoiseModel::independent(channels),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use symnoise_core::basis::{build_qbasis, classify_operator, sector_decompose};
    use symnoise_core::operator::{commutator, kron, max_abs};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn two_qubit_chain_matches_direct_construction() {
        let cfg = TfimConfig { n: 2, couplings: Couplings::Chain { j: 0.7 }, h: 0.3, ..Default::default() };
        let id = CMatrix::identity(2, 2);
        let direct = kron(&pauli_z(), &pauli_z()) * c(0.7)
            + (kron(&pauli_x(), &id) + kron(&id, &pauli_x())) * c(0.3);
        assert!(max_abs(&(cfg.hamiltonian() - direct)) < 1e-14);
    }

    #[test]
    fn all_to_all_commutes_with_total_spin() {
        for n in 2..=4 {
            let cfg = TfimConfig { n, ..Default::default() };
            let comm = commutator(&cfg.hamiltonian(), &build_j_squared(n)).unwrap();
            assert!(max_abs(&comm) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn chain_breaks_total_spin_beyond_two_qubits() {
        let cfg = TfimConfig { n: 3, couplings: Couplings::Chain { j: 1.0 }, ..Default::default() };
        let comm = commutator(&cfg.hamiltonian(), &build_j_squared(3)).unwrap();
        assert!(max_abs(&comm) > 0.1);
        let grid = TimeGrid::new(0.01, 10).unwrap();
        assert!(build_tfim(&cfg, grid).unwrap_err().is_invariant_violation());
    }

    #[test]
    fn zero_field_is_diagonal() {
        let cfg = TfimConfig { h: 0.0, ..Default::default() };
        let h = cfg.hamiltonian();
        for a in 0..8 {
            for b in 0..8 {
                if a != b {
                    assert_eq!(h[(a, b)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn total_spin_spectra() {
        let s2 = sector_decompose(&build_j_squared(2), None).unwrap();
        assert_eq!(s2.multiplicities, vec![1, 3]);
        assert!((s2.eigenvalues[0]).abs() < 1e-10 && (s2.eigenvalues[1] - 2.0).abs() < 1e-10);
        let s3 = sector_decompose(&build_j_squared(3), None).unwrap();
        assert_eq!(s3.multiplicities, vec![4, 4]);
        assert!((s3.eigenvalues[0] - 0.75).abs() < 1e-10 && (s3.eigenvalues[1] - 3.75).abs() < 1e-10);
        for n in 2..=5 {
            let s = sector_decompose(&build_j_squared(n), None).unwrap();
            let q = s.sector_index(symmetric_eigenvalue(n));
            assert_eq!(s.multiplicities[q], n + 1);
        }
    }

    #[test]
    fn dephasing_classes() {
        let basis = build_qbasis(&sector_decompose(&build_j_squared(2), None).unwrap());
        let psd = PsdSpec::White { s0: 1.0, omega_uv: 10.0 };
        let global = build_dephasing(2, DephasingKind::Global, &psd).unwrap();
        let sum: CMatrix = global.channels.iter().map(|c| c.operator.clone()).sum();
        assert!(classify_operator(&sum, &basis, 1e-10).unwrap().symmetry_preserving);
        let local = build_dephasing(2, DephasingKind::Local, &psd).unwrap();
        for ch in &local.channels {
            assert!(classify_operator(&ch.operator, &basis, 1e-10).unwrap().ladder_weight() > 0.1);
        }
    }

    #[test]
    fn large_systems_need_override() {
        let cfg = TfimConfig { n: 7, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(TfimConfig { allow_large: true, ..cfg }.validate().is_ok());
    }
}
