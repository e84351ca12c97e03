//! Plaquette Berry fluxes and the invariant pair `(dim, c₁)`.
//!
//! Link variables are normalized overlap determinants between neighboring
//! frames. With `W` the product around a plaquette traversed `+s, +t, −s, −t`,
//! the discrete curvature is `arg(conj W)`; it approximates `dA` for the Berry
//! connection `A = i⟨u|du⟩`, so the total over `2π` is the first Chern number
//! with `ds∧dt` positive.

use std::ops::Range;

use ndarray::{s, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{band_structure, BandData, BlochGrid};
use crate::error::{Error, Result};
use crate::model::{GaugeField, MagneticLattice};
use crate::spectral::dense;

type C = Complex64;

/// Orientation recorded in every Chern result.
pub const ORIENTATION: &str = "ds_wedge_dt_positive";

/// Overlap determinants below this modulus mean the grid is too coarse.
const SINGULAR: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct ChernResult {
    pub band_group: Range<usize>,
    pub dim: usize,
    pub chern: i64,
    /// `Σ plaquette_flux / 2π` before rounding.
    pub total: f64,
    /// Indexed like the grid by the lower-left corner, each in `(−π, π]`.
    pub plaquette_flux: Vec<f64>,
    pub max_flux: f64,
    pub grid: BlochGrid,
    pub orientation: &'static str,
}

impl ChernResult {
    pub fn integrality_defect(&self) -> f64 {
        (self.total - self.chern as f64).abs()
    }

    /// `{group, dim, chern, max_flux, grid, orientation}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "group": [self.band_group.start, self.band_group.end],
            "dim": self.dim,
            "chern": self.chern,
            "max_flux": self.max_flux,
            "grid": [self.grid.n_s, self.grid.n_t],
            "orientation": self.orientation,
        })
    }
}

fn link(a: &Array2<C>, b: &Array2<C>, at: (usize, usize)) -> Result<C> {
    let d = dense::determinant(&dense::adjoint_mul(a.view(), b.view()));
    let modulus = d.norm();
    if modulus < SINGULAR {
        return Err(Error::SingularOverlap { s: at.0, t: at.1, modulus });
    }
    Ok(d / modulus)
}

/// Chern number of the bundle spanned by columns `cols` of the frames over `grid`.
pub fn chern_of_frames(grid: BlochGrid, frames: &[Array2<C>], cols: Range<usize>) -> Result<ChernResult> {
    if frames.len() != grid.len() {
        return Err(Error::InvalidArgument(format!("{} frames for a grid of {}", frames.len(), grid.len())));
    }
    if cols.is_empty() {
        return Err(Error::InvalidArgument("empty band group".into()));
    }
    let sub: Vec<Array2<C>> = frames.iter().map(|f| f.slice(s![.., cols.clone()]).to_owned()).collect();
    let links: Vec<Result<(C, C)>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let (a, b) = grid.coords(p);
            let us = link(&sub[p], &sub[grid.index(a + 1, b)], (a, b))?;
            let ut = link(&sub[p], &sub[grid.index(a, b + 1)], (a, b))?;
            Ok((us, ut))
        })
        .collect();
    let links = links.into_iter().collect::<Result<Vec<_>>>()?;
    let mut plaquette_flux = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        let (a, b) = grid.coords(p);
        let w = links[p].0 * links[grid.index(a + 1, b)].1 * links[grid.index(a, b + 1)].0.conj() * links[p].1.conj();
        plaquette_flux.push(w.conj().arg());
    }
    let total = plaquette_flux.iter().sum::<f64>() / (2.0 * std::f64::consts::PI);
    let max_flux = plaquette_flux.iter().fold(0.0_f64, |m, f| m.max(f.abs()));
    Ok(ChernResult {
        dim: cols.len(),
        band_group: cols,
        chern: total.round() as i64,
        total,
        plaquette_flux,
        max_flux,
        grid,
        orientation: ORIENTATION,
    })
}

/// Chern number of a band group (a union of consecutive certified groups).
pub fn chern_fhs(bands: &BandData, group: Range<usize>) -> Result<ChernResult> {
    bands.require_group(&group)?;
    chern_of_frames(bands.grid, &bands.frames, group)
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantPair {
    pub dim: usize,
    pub c1: i64,
    pub detail: Option<ChernResult>,
}

impl InvariantPair {
    pub fn pair(&self) -> (usize, i64) {
        (self.dim, self.c1)
    }
}

/// `(dim, c₁)` of the bands with energies inside `(lower, upper)`.
pub fn invariant_pair(lattice: &MagneticLattice, gauge: &GaugeField, interval: (f64, f64), grid: BlochGrid) -> Result<InvariantPair> {
    let bands = band_structure(lattice, gauge, grid)?;
    invariant_pair_of(&bands, interval)
}

pub(crate) fn invariant_pair_of(bands: &BandData, (lower, upper): (f64, f64)) -> Result<InvariantPair> {
    if !(lower < upper) {
        return Err(Error::InvalidArgument(format!("interval ({lower}, {upper}) is empty")));
    }
    let range = bands.interval_bands(lower, upper)?;
    if range.is_empty() {
        return Ok(InvariantPair { dim: 0, c1: 0, detail: None });
    }
    let detail = chern_of_frames(bands.grid, &bands.frames, range)?;
    Ok(InvariantPair { dim: detail.dim, c1: detail.chern, detail: Some(detail) })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::{build_gauge, GaugeKind, Geometry};

    fn setup(k: u32, q: u32) -> (MagneticLattice, GaugeField) {
        let lat = MagneticLattice::new(k, q, 1, 1, Geometry::Torus).unwrap();
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        (lat, g)
    }

    #[test]
    fn all_bands_together_are_trivial() {
        let (lat, g) = setup(1, 4);
        let bands = band_structure(&lat, &g, BlochGrid::square(8).unwrap()).unwrap();
        let r = chern_fhs(&bands, 0..bands.bands()).unwrap();
        assert_eq!(r.chern, 0);
        assert!(r.integrality_defect() < 1e-6);
    }

    #[test]
    fn lowest_landau_group_for_k1() {
        let (lat, g) = setup(1, 8);
        let bands = band_structure(&lat, &g, BlochGrid::square(12).unwrap()).unwrap();
        let r = chern_fhs(&bands, bands.lowest_group().unwrap()).unwrap();
        assert_eq!((r.dim, r.chern), (2, -1));
        assert!(r.integrality_defect() < 1e-6);
        assert_eq!(r.to_json()["orientation"], ORIENTATION);
    }

    #[test]
    fn unitary_frame_rotation_keeps_the_chern_number() {
        let (lat, g) = setup(1, 8);
        let mut bands = band_structure(&lat, &g, BlochGrid::square(12).unwrap()).unwrap();
        let before = chern_fhs(&bands, 0..2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for f in bands.frames.iter_mut() {
            let m = Array2::from_shape_fn((2, 2), |_| C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            let u = dense::orthonormalize(&m).unwrap();
            let rotated = f.slice(s![.., 0..2]).dot(&u);
            f.slice_mut(s![.., 0..2]).assign(&rotated);
        }
        let after = chern_fhs(&bands, 0..2).unwrap();
        assert_eq!(before.chern, after.chern);
        assert!((before.total - after.total).abs() < 1e-9);
    }

    #[test]
    fn ungrouped_ranges_are_refused() {
        let (lat, g) = setup(1, 8);
        let bands = band_structure(&lat, &g, BlochGrid::square(6).unwrap()).unwrap();
        assert!(matches!(chern_fhs(&bands, 0..1), Err(Error::NoUniformGap)));
    }

    #[test]
    fn interval_below_everything_is_the_zero_pair() {
        let (lat, g) = setup(1, 4);
        let p = invariant_pair(&lat, &g, (-100.0, -50.0), BlochGrid::square(6).unwrap()).unwrap();
        assert_eq!(p.pair(), (0, 0));
    }

    #[test]
    fn interval_cutting_a_band_has_no_constant_rank() {
        let (lat, g) = setup(1, 4);
        let bands = band_structure(&lat, &g, BlochGrid::square(6).unwrap()).unwrap();
        let (lo, hi) = bands.band_range(0);
        assert!(hi > lo);
        let err = invariant_pair_of(&bands, (-100.0, 0.5 * (lo + hi))).unwrap_err();
        assert!(matches!(err, Error::NonConstantRank { .. }));
    }

    #[test]
    fn first_gap_interval_for_k1() {
        let (lat, g) = setup(1, 8);
        let p = invariant_pair(&lat, &g, (-1.0, 4.0 * PI), BlochGrid::square(12).unwrap()).unwrap();
        assert_eq!(p.pair(), (2, -1));
    }
}
