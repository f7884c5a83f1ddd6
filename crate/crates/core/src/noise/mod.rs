//! Stationary Gaussian noise: spectra, harmonic-superposition synthesis and
//! spectral estimation.

mod estimate;
mod psd;
mod synth;

pub use estimate::{empirical_psd, CrossSpectrum, EmpiricalPsd, MIN_PERIODOGRAM_TRAJECTORIES};
pub use psd::{autocorrelation, correlation_length, PsdSpec};
pub use synth::{
    sample_trajectory, splitmix64, trajectory_seed, NoiseChannel, NoiseModel, SynthesisPlan, Trajectory,
    DEFAULT_MODES,
};
pub(crate) use synth::traceless;
