//! Simulation of a buckled-plate NEMS qubit in dimensionless units (ħ = m = λ = 1).

pub mod control;
pub mod coupling;
pub mod double_well;
pub mod error;
pub mod gates;
pub mod mechanics;
pub mod numerics;

pub use error::{Error, Result};
