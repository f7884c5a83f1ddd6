use thiserror::Error;

/// Errors raised by the numerical library.
///
/// The variants split into two families: configuration/input problems
/// (bad dimensions, invalid spectra, inconsistent grids) and invariant
/// violations detected while computing (symmetry broken by the Hamiltonian,
/// structural checks failing). The CLI maps them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max |A - A^dag| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max |U^dag U - 1| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("state trace {trace} differs from 1")]
    NonUnitTrace { trace: f64 },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("time step {dt} violates the Nyquist limit pi/omega_uv = {limit}")]
    Nyquist { dt: f64, limit: f64 },

    #[error("correlation matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no finite correlation length: {0}")]
    NoCorrelationLength(String),

    #[error("symmetry violated: [Q, H0] nonzero at steps {steps:?} (max {max_deviation:e})")]
    SymmetryViolation { steps: Vec<usize>, max_deviation: f64 },

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that signal a broken physical or structural invariant
    /// rather than bad input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::SymmetryViolation { .. } | Error::Invariant(_) | Error::NotUnitary { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
