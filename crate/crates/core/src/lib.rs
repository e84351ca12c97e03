//! Magnetic Laplacians on square lattices: spectra and gaps, Bloch bands and
//! Chern numbers, edge spectra of Dirichlet restrictions, and finite-propagation
//! checks for compressions to regions.

pub mod error;
pub mod bloch;
pub mod coarse;
pub mod edge;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
