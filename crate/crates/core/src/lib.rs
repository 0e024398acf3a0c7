//! Regularized factorization method for locating a delaminated inclusion
//! inside the unit disk from electrostatic boundary measurements.
//!
//! The pipeline is split into four modules:
//!
//! * [`forward`] builds the current-gap operator of a concentric circular
//!   inclusion from its closed-form Fourier symbols,
//! * [`data`] perturbs that operator with relative noise, takes the
//!   imaginary part when the coefficients are complex, and factors it,
//! * [`sampling`] evaluates the spectral cut-off indicator on a lattice of
//!   sampling points and normalizes it into the imaging functional `W(z)`,
//! * [`cli`] wires the stages together and writes the results to disk.

pub mod cli;
pub mod data;
mod error;
pub mod forward;
pub mod sampling;

pub use error::{Error, Result};
