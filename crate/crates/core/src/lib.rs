//! Fractional Kelvin-Voigt viscoelastodynamics on domains with prescribed,
//! growing cracks.
//!
//! The crate provides an implicit time stepper for the regularized memory
//! equation, the energy bookkeeping of the scheme, and numerical studies
//! that exercise the limit and uniqueness properties of the model.

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod domain;
pub mod energy;
pub mod error;
pub mod fixtures;
pub mod kernel;
pub mod linalg;
pub mod problem;
pub mod stepper;
pub mod tensor;

pub use error::{Error, Result};
