//! Transverse-field Ising scenarios under global and local dephasing:
//! model construction, scenario runs, reports and heatmap rendering.

pub mod render;
pub mod scenario;
pub mod tfim;
