//! Hofstadter model `H = −Σ U(v→u)` with flux `p/q` per plaquette.
//!
//! Landau gauge, magnetic cell of `q × 1` sites. A twist `s` acts across the
//! `q` sites of a cell and `t` across one site, so the lattice momenta are
//! `k_x = 2πs/q` and `k_y = 2πt`.

use super::{BandData, BlochGrid, CellStencil, FiberFamily};
use crate::error::Result;
use crate::model::{assemble_stencil, Flux, GaugeField, GaugeKind, Geometry, HermitianOperator, Provenance, Window};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HoppingModel {
    flux: Flux,
}

impl HoppingModel {
    pub fn new(p: i64, q: i64) -> Result<Self> {
        Ok(HoppingModel { flux: Flux::new(p, q)? })
    }

    pub fn flux(&self) -> Flux {
        self.flux
    }

    /// Sites per magnetic cell.
    pub fn cell_sites(&self) -> usize {
        self.flux.den as usize
    }

    fn window(&self, cells_x: usize, cells_y: usize) -> Window {
        Window { nx: cells_x * self.cell_sites(), ny: cells_y, periodic_x: true, periodic_y: true, origin: (0, 0) }
    }

    pub fn stencil(&self) -> Result<CellStencil> {
        let gauge = GaugeField::build(GaugeKind::Landau, self.flux, self.window(1, 1), (0.0, 0.0))?;
        CellStencil::from_gauge(&gauge, (self.cell_sites(), 1), 1.0, vec![0.0; self.cell_sites()])
    }

    pub fn bands(&self, grid: BlochGrid) -> Result<BandData> {
        BandData::from_family(&FiberFamily::build(&self.stencil()?, grid), None)
    }

    /// The model on a torus of `cells_x × cells_y` magnetic cells.
    pub fn torus(&self, cells_x: usize, cells_y: usize) -> Result<HermitianOperator> {
        let gauge = GaugeField::build(GaugeKind::Landau, self.flux, self.window(cells_x, cells_y), (0.0, 0.0))?;
        let provenance = Provenance {
            k: 0,
            q: self.cell_sites() as u32,
            flux: self.flux,
            gauge: GaugeKind::Landau,
            geometry: Geometry::Torus,
            twist: (0.0, 0.0),
            mask: None,
            w_norm: 0.0,
            shift: 0.0,
            note: Some(format!("hopping model, flux {}", self.flux)),
        };
        assemble_stencil(&gauge, None, 1.0, &|_| 0.0, 1.0, provenance)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::dense;

    #[test]
    fn half_flux_fiber_matches_the_closed_form() {
        let m = HoppingModel::new(1, 2).unwrap();
        let st = m.stencil().unwrap();
        for &(s, t) in &[(0.0, 0.0), (0.3, 0.1), (0.75, 0.6)] {
            let w = dense::eigvalsh(&st.fiber((s, t))).unwrap();
            let e = 2.0 * ((PI * s).cos().powi(2) + (2.0 * PI * t).cos().powi(2)).sqrt();
            assert!((w[0] + e).abs() < 1e-12 && (w[1] - e).abs() < 1e-12, "{w:?} vs ±{e}");
        }
    }

    #[test]
    fn third_flux_has_three_separated_bands() {
        let m = HoppingModel::new(1, 3).unwrap();
        let b = m.bands(BlochGrid::square(12).unwrap()).unwrap();
        assert_eq!(b.band_groups.len(), 3);
    }

    #[test]
    fn torus_matches_fibers() {
        let m = HoppingModel::new(1, 3).unwrap();
        let h = m.torus(4, 5).unwrap();
        assert_eq!(h.dim(), 60);
        let mut direct = dense::eigvalsh(&h.to_dense()).unwrap();
        let mut folded = m.bands(BlochGrid::new(4, 5).unwrap()).unwrap().energies.concat();
        direct.sort_by(f64::total_cmp);
        folded.sort_by(f64::total_cmp);
        let worst = direct.iter().zip(&folded).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
    }
}

