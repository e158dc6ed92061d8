//! Pseudospectral ground-state solver for Choquard-type equations and systems
//! with a Riesz-potential coupling, plus the numerical checks used to verify
//! computed ground states.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod params;
pub mod functionals;
pub mod potentials;
pub mod solvers;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use params::{CriticalExponent, ProblemParams, ThetaPair, Verdict};
