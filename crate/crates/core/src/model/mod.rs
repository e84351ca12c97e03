//! Lattice discretization of the magnetic Laplacian `D_k = ∇*∇ − 4πk + W`.

pub mod gauge;
pub mod lattice;
pub mod operator;
pub mod region;

use serde::{Deserialize, Serialize};

pub use gauge::{build_gauge, GaugeField, GaugeKind};
pub use lattice::{unit_phase, Dir, Flux, Geometry, MagneticLattice, Site, Step, Window};
pub use operator::{assemble_bulk, assemble_restricted, assemble_stencil, assemble_window, gauge_transform, CsrMatrix, HermitianOperator, Provenance};
pub use region::{RegionMask, ShapeDescriptor};

use crate::error::Result;

/// The model block of an experiment config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub k: u32,
    pub q: u32,
    pub cells_x: usize,
    pub cells_y: usize,
    pub geometry: Geometry,
    #[serde(default = "default_gauge")]
    pub gauge: GaugeKind,
    /// Row-major `q²` samples over one unit cell; omitted means `W = 0`.
    #[serde(default)]
    pub potential: Option<Vec<f64>>,
    #[serde(default)]
    pub mask_descriptor: Option<ShapeDescriptor>,
}

fn default_gauge() -> GaugeKind {
    GaugeKind::Landau
}

impl ModelConfig {
    pub fn lattice(&self) -> Result<MagneticLattice> {
        let lat = MagneticLattice::new(self.k, self.q, self.cells_x, self.cells_y, self.geometry)?;
        match &self.potential {
            Some(p) => lat.with_potential(p.clone()),
            None => Ok(lat),
        }
    }
}
