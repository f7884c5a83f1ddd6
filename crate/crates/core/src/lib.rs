//! Open-system dynamics of symmetry-constrained quantum systems under
//! classical Gaussian noise: symmetry-adapted bases, noise synthesis,
//! Monte Carlo propagation and a second-order cumulant (filter function)
//! predictor.

pub mod basis;
pub mod error;
pub mod fff;
pub mod grid;
pub mod noise;
pub mod operator;
pub mod propagation;
pub mod quad;

pub use error::{Error, Result};
pub use operator::{CMatrix, RMatrix};
