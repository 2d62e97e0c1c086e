//! Axisymmetric Navier-Stokes with vertical-only viscosity, reduced to a 2-D `(r, z)`
//! vorticity problem, together with runtime checks of its a priori estimates.

pub mod biot_savart;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod grid;
pub mod norms;
pub mod tridiag;

pub use error::{Error, Result};
