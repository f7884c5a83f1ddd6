//! Dense complex matrix algebra on small Hilbert spaces.
//!
//! Everything here works on `nalgebra` dynamic matrices of `Complex64`.
//! Dimensions are small (N <= 64) so all routines are dense and direct.
//! Operator bases used for Liouville representations are assumed
//! Hilbert-Schmidt orthonormal: `Tr(x_i^dag x_j) = delta_ij`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Relative Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Absolute unitarity tolerance on `max|U^dag U - 1|`.
pub const UNITARY_TOL: f64 = 1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Largest entry magnitude.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn hermiticity_deviation(a: &CMatrix) -> f64 {
    max_abs(&(a - a.adjoint()))
}

pub fn is_hermitian(a: &CMatrix) -> bool {
    a.is_square() && hermiticity_deviation(a) <= HERMITIAN_TOL * max_abs(a).max(1e-300)
}

pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - identity(n)))
}

pub fn is_unitary(u: &CMatrix) -> bool {
    u.is_square() && unitarity_deviation(u) <= UNITARY_TOL
}

fn ensure_square(a: &CMatrix) -> Result<usize> {
    if a.is_square() {
        Ok(a.nrows())
    } else {
        Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() })
    }
}

fn ensure_same_dim(a: &CMatrix, b: &CMatrix) -> Result<usize> {
    let n = ensure_square(a)?;
    let m = ensure_square(b)?;
    if n != m {
        return Err(Error::DimensionMismatch { expected: n, found: m });
    }
    Ok(n)
}

fn ensure_hermitian(a: &CMatrix) -> Result<()> {
    ensure_square(a)?;
    if !is_hermitian(a) {
        return Err(Error::NotHermitian { deviation: hermiticity_deviation(a) });
    }
    Ok(())
}

/// `ab - ba`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure_same_dim(a, b)?;
    Ok(a * b - b * a)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `values`.
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    ensure_hermitian(a)?;
    // Symmetrise first so that rounding-level anti-Hermitian parts never leak in.
    let sym = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let n = a.nrows();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values: order.iter().map(|&i| eig.eigenvalues[i]).collect(), vectors })
}

/// `exp(-i h t)` through the eigen-decomposition of `h`.
pub fn expm_hermitian_generator(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let eig = hermitian_eigen(h)?;
    Ok(exp_from_eigen(&eig, t))
}

/// `exp(-i h t)` from a precomputed spectrum of `h`.
pub fn exp_from_eigen(eig: &HermitianEigen, t: f64) -> CMatrix {
    let v = &eig.vectors;
    let mut scaled = v.clone();
    for (j, &lambda) in eig.values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lambda * t);
        for z in scaled.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    scaled * v.adjoint()
}

/// Eigenvalues of a general real matrix via a real Schur decomposition.
///
/// Tolerances are loosened step by step when the QR iteration stalls;
/// `None` when none of them converges.
pub fn general_eigenvalues(m: &RMatrix) -> Option<Vec<Complex64>> {
    for eps in [1e-14, 1e-12, 1e-10] {
        if let Some(schur) = nalgebra::Schur::try_new(m.clone(), eps, 100_000) {
            return Some(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    None
}

/// Hilbert-Schmidt inner product `Tr(a^dag b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Result<Complex64> {
    ensure_same_dim(a, b)?;
    Ok(hs_inner_unchecked(a, b))
}

#[inline]
pub(crate) fn hs_inner_unchecked(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Real part of `Tr(a b)` for Hermitian `a`: the expansion coefficient of `b`
/// along `a` when `a` belongs to an orthonormal Hermitian basis.
#[inline]
pub(crate) fn hs_coefficient(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub fn hs_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `u x u^dag` for unitary `u`.
pub fn adjoint_action(u: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    ensure_same_dim(u, x)?;
    let dev = unitarity_deviation(u);
    if dev > UNITARY_TOL {
        return Err(Error::NotUnitary { deviation: dev });
    }
    Ok(u * x * u.adjoint())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `op` acting on qubit `site` (0-based, most significant first) of an
/// `n`-qubit register.
pub fn embed_qubit_operator(op: &CMatrix, site: usize, n: usize) -> CMatrix {
    (0..n).fold(CMatrix::identity(1, 1), |acc, k| {
        if k == site {
            kron(&acc, op)
        } else {
            kron(&acc, &identity(2))
        }
    })
}

/// Trace norm `||a||_1` from singular values.
pub fn trace_norm(a: &CMatrix) -> f64 {
    a.clone().svd(false, false).singular_values.iter().sum()
}

/// `(1/2) ||a - b||_1`.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    ensure_same_dim(a, b)?;
    Ok(0.5 * trace_norm(&(a - b)))
}

/// Liouville matrix of a linear map in an orthonormal operator basis:
/// entry `(k, l) = Tr(x_k^dag map(x_l))`.
pub fn liouville_matrix<F>(map: F, basis: &[CMatrix]) -> Result<CMatrix>
where
    F: Fn(&CMatrix) -> CMatrix,
{
    let n = basis.first().map(|b| b.nrows()).unwrap_or(0);
    let dim = basis.len();
    let mut out = CMatrix::zeros(dim, dim);
    for (l, xl) in basis.iter().enumerate() {
        let image = map(xl);
        if image.nrows() != n || image.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: image.nrows() });
        }
        for (k, xk) in basis.iter().enumerate() {
            out[(k, l)] = hs_inner_unchecked(xk, &image);
        }
    }
    Ok(out)
}

/// Real superoperator matrix in a Hermitian orthonormal basis.
///
/// Only Hermiticity-preserving maps have a real representation; the
/// constructor rejects maps whose matrix carries imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOp {
    pub matrix: RMatrix,
}

impl SuperOp {
    pub fn from_map<F>(map: F, basis: &[CMatrix]) -> Result<Self>
    where
        F: Fn(&CMatrix) -> CMatrix,
    {
        let m = liouville_matrix(map, basis)?;
        let scale = m.iter().fold(0.0f64, |s, z| s.max(z.norm())).max(1.0);
        let imag = m.iter().fold(0.0f64, |s, z| s.max(z.im.abs()));
        if imag > 1e-10 * scale {
            return Err(Error::Invariant(format!(
                "map is not Hermiticity preserving (imaginary Liouville entries up to {imag:e})"
            )));
        }
        Ok(SuperOp { matrix: m.map(|z| z.re) })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn compose(&self, other: &SuperOp) -> SuperOp {
        SuperOp { matrix: &self.matrix * &other.matrix }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    pub fn symmetric_part(&self) -> RMatrix {
        (&self.matrix + self.matrix.transpose()) * 0.5
    }

    pub fn antisymmetric_part(&self) -> RMatrix {
        (&self.matrix - self.matrix.transpose()) * 0.5
    }
}

/// Coordinates of a Hermitian operator in an orthonormal Hermitian basis.
pub fn to_liouville_vector(rho: &CMatrix, basis: &[CMatrix]) -> DVector<f64> {
    DVector::from_iterator(basis.len(), basis.iter().map(|x| hs_coefficient(x, rho)))
}

pub fn from_liouville_vector(v: &DVector<f64>, basis: &[CMatrix]) -> CMatrix {
    let n = basis[0].nrows();
    let mut out = CMatrix::zeros(n, n);
    for (c, x) in v.iter().zip(basis) {
        if *c != 0.0 {
            out.zip_apply(x, |o, xv| *o += xv * *c);
        }
    }
    out
}

/// Projector `|psi><psi|` for a (not necessarily normalised) column vector.
pub fn projector(psi: &DVector<Complex64>) -> CMatrix {
    let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    psi * psi.adjoint() / Complex64::new(norm2, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        max_abs(&(a - b)) <= tol
    }

    #[test]
    fn pauli_commutator() {
        let c = commutator(&pauli_x(), &pauli_y()).unwrap();
        assert!(close(&c, &(pauli_z() * Complex64::new(0.0, 2.0)), 1e-15));
        let a = pauli_x() + pauli_z() * Complex64::new(0.3, 0.0);
        assert!(max_abs(&commutator(&a, &a).unwrap()) == 0.0);
    }

    #[test]
    fn commutator_rejects_mismatched_dims() {
        assert!(matches!(
            commutator(&pauli_x(), &identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exponential_closed_forms() {
        let u = expm_hermitian_generator(&pauli_z(), PI / 2.0).unwrap();
        let expected = CMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::from_polar(1.0, -PI / 2.0),
            Complex64::from_polar(1.0, PI / 2.0),
        ]));
        assert!(close(&u, &expected, 1e-14));

        assert!(close(&expm_hermitian_generator(&pauli_x(), 0.0).unwrap(), &identity(2), 1e-15));

        // exp(-i sx t) = cos t - i sin t sx; at t = pi this is -1.
        for t in [0.3, 1.1, PI] {
            let u = expm_hermitian_generator(&pauli_x(), t).unwrap();
            let closed = identity(2) * Complex64::new(t.cos(), 0.0) - pauli_x() * Complex64::new(0.0, t.sin());
            assert!(close(&u, &closed, 1e-14));
        }
    }

    #[test]
    fn exponential_rejects_non_hermitian() {
        let mut a = pauli_x();
        a[(0, 1)] = Complex64::new(2.0, 0.0);
        assert!(matches!(expm_hermitian_generator(&a, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn hs_inner_on_paulis() {
        assert_eq!(hs_inner(&pauli_x(), &pauli_x()).unwrap(), Complex64::new(2.0, 0.0));
        assert_eq!(hs_inner(&pauli_x(), &pauli_y()).unwrap(), ZERO);
        assert!(hs_inner(&pauli_x(), &identity(4)).is_err());
    }

    #[test]
    fn adjoint_action_rotates_sigma_x() {
        assert!(close(&adjoint_action(&identity(2), &pauli_y()).unwrap(), &pauli_y(), 0.0));
        let u = expm_hermitian_generator(&pauli_z(), PI / 4.0).unwrap();
        let r = adjoint_action(&u, &pauli_x()).unwrap();
        // exp(-i sz pi/4) sx exp(i sz pi/4) = sy
        assert!(close(&r, &pauli_y(), 1e-14));
        assert!((hs_norm(&r) - hs_norm(&pauli_x())).abs() < 1e-14);
    }

    #[test]
    fn adjoint_action_rejects_non_unitary() {
        let u = pauli_x() * Complex64::new(1.1, 0.0);
        assert!(matches!(adjoint_action(&u, &pauli_z()), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn trace_norm_of_pauli() {
        assert!((trace_norm(&pauli_x()) - 2.0).abs() < 1e-14);
        let rho = projector(&DVector::from_vec(vec![ONE, ZERO]));
        let mixed = identity(2) * Complex64::new(0.5, 0.0);
        assert!((trace_distance(&rho, &mixed).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn embed_builds_tensor_products() {
        let z1 = embed_qubit_operator(&pauli_z(), 0, 2);
        assert!(close(&z1, &kron(&pauli_z(), &identity(2)), 0.0));
        assert_eq!(embed_qubit_operator(&pauli_x(), 2, 3).nrows(), 8);
    }
}
