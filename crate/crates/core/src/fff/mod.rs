//! Filter-function predictor: toggling-frame control matrix, second-order
//! coherence parameters, cumulant superoperator, bounds and steady states.

mod bounds;
mod coherence;
mod control;
mod cumulant;
mod steady;

pub use bounds::{distance_and_bounds, overlap_terms, BoundReport};
pub use coherence::{
    channel_groups, coherence_params, default_omega_grid, noise_class, trapezoid_weights, CoherenceParams,
    CovarianceSource, EffectiveChannels, FilterFunctions, NoiseClass, ACTIVE_TOL,
};
pub use control::{check_block_structure, control_matrix, ladder_amplitude, square_form, BlockCheck, ControlMatrix};
pub use cumulant::{
    apply_to_state, assemble_cumulant, assemble_cumulant_literal, predict_average_state, predict_first_order,
    spectrum_report, structure_check, CumulantSuperoperator, SpectrumReport, StructureReport,
};
pub use steady::{expected_steady_state, steady_state, SteadyStateReport, HORIZON};
