//! Dirichlet restrictions of the magnetic Laplacian to x-periodic strips.
//!
//! A strip is the region `Z = {y ≤ f(x)}` cut off `width_cells` below the
//! lowest point of its boundary, so it has two edges: the shape boundary on
//! top and the cut at the bottom. Magnetic translation by one x-period of the
//! shape commutes with the restricted operator, so the spectrum of a strip of
//! `length_cells` is the union over `s = a/B` of the reduced operators on one
//! period with Bloch twist `s`.

mod fill;
mod flow;

pub use fill::{fill_samples, gap_filling_check, localization_profile, EdgeReport, FillSample, LocalizationProfile};
pub use flow::{strip_bands, Crossing, DispersionPoint, Edge, FlowOptions, SpectralFlowReport, EDGE_MASS, FLOW_SIGN_CONVENTION, MIN_OVERLAP};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    assemble_restricted, assemble_bulk, build_gauge, GaugeField, GaugeKind, Geometry, HermitianOperator, MagneticLattice,
    RegionMask, ShapeDescriptor, Window,
};
use crate::spectral::{eigensolve, EigenMode, SolverOptions, SpectralInterval};

/// Rows of empty space kept above the highest boundary point, in cells.
pub const HEADROOM_CELLS: usize = 2;

#[derive(Clone, Debug, Serialize)]
pub struct StripSpec {
    #[serde(skip)]
    pub lattice: MagneticLattice,
    pub width_cells: usize,
    pub length_cells: usize,
    pub shape: ShapeDescriptor,
    pub headroom_cells: usize,
}

impl StripSpec {
    pub fn new(lattice: &MagneticLattice, width_cells: usize, length_cells: usize, shape: ShapeDescriptor) -> Result<Self> {
        let spec = StripSpec {
            lattice: lattice.with_geometry(Geometry::Strip),
            width_cells,
            length_cells,
            shape,
            headroom_cells: HEADROOM_CELLS,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Flat edge `y ≤ 0`.
    pub fn flat(lattice: &MagneticLattice, width_cells: usize, length_cells: usize) -> Result<Self> {
        Self::new(lattice, width_cells, length_cells, ShapeDescriptor::HalfPlane { c: 0.0 })
    }

    fn validate(&self) -> Result<()> {
        if self.width_cells < 4 {
            return Err(Error::InvalidStrip(format!("width {} cells is below 4", self.width_cells)));
        }
        if self.length_cells == 0 {
            return Err(Error::InvalidStrip("length must be positive".into()));
        }
        let p = self.period_cells()?;
        if self.length_cells % p != 0 {
            return Err(Error::InvalidStrip(format!("length {} is not a multiple of the shape period {p}", self.length_cells)));
        }
        let mask = self.mask(self.reduced_window()?)?;
        if mask.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(())
    }

    /// Shape period in whole cells.
    pub fn period_cells(&self) -> Result<usize> {
        let p = self
            .shape
            .x_period()
            .ok_or_else(|| Error::InvalidStrip("strip shapes must be periodic in x".into()))?;
        let r = p.round();
        if r < 1.0 || (p - r).abs() > 1e-12 {
            return Err(Error::InvalidStrip(format!("shape period {p} is not a whole number of cells")));
        }
        Ok(r as usize)
    }

    /// Number of Bloch twists making up the full strip.
    pub fn blocks(&self) -> usize {
        self.length_cells / self.period_cells().expect("validated")
    }

    /// Lowest and highest continuum y reached by the boundary.
    fn boundary_extent(&self) -> Result<(f64, f64)> {
        Ok(match &self.shape {
            ShapeDescriptor::All => return Err(Error::InvalidStrip("a strip needs a boundary".into())),
            ShapeDescriptor::HalfPlane { c } => (*c, *c),
            ShapeDescriptor::Graph { samples, .. } => {
                (samples.iter().copied().fold(f64::INFINITY, f64::min), samples.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            }
            ShapeDescriptor::Decorated { c, radius, center_y } => (*c, c.max(center_y + radius)),
            _ => return Err(Error::InvalidStrip("strip shapes must be periodic in x".into())),
        })
    }

    fn window_with(&self, cells_x: usize) -> Result<Window> {
        let q = self.lattice.q() as i64;
        let (lo, hi) = self.boundary_extent()?;
        let j_lo = (lo * q as f64).floor() as i64 - self.width_cells as i64 * q + 1;
        let j_hi = (hi * q as f64).ceil() as i64 + self.headroom_cells as i64 * q;
        Ok(Window {
            nx: cells_x * q as usize,
            ny: (j_hi - j_lo + 1) as usize,
            periodic_x: true,
            periodic_y: false,
            origin: (0, j_lo),
        })
    }

    /// One shape period wide.
    pub fn reduced_window(&self) -> Result<Window> {
        self.window_with(self.period_cells()?)
    }

    /// The whole strip.
    pub fn full_window(&self) -> Result<Window> {
        self.window_with(self.length_cells)
    }

    pub fn mask(&self, window: Window) -> Result<RegionMask> {
        RegionMask::from_descriptor(window, self.lattice.h(), self.shape.clone())
    }

    /// Reduced operator with Bloch twist `s` across one shape period.
    pub fn reduced_operator(&self, s: f64) -> Result<(HermitianOperator, RegionMask)> {
        let w = self.reduced_window()?;
        let gauge = GaugeField::build(GaugeKind::Landau, self.lattice.flux(), w, (s, 0.0))?;
        let mask = self.mask(w)?;
        Ok((assemble_restricted(&self.lattice, &gauge, &mask)?, mask))
    }

    /// Restricted operator on the full strip.
    pub fn full_operator(&self) -> Result<(HermitianOperator, RegionMask)> {
        let w = self.full_window()?;
        let gauge = GaugeField::build(GaugeKind::Landau, self.lattice.flux(), w, (0.0, 0.0))?;
        let mask = self.mask(w)?;
        Ok((assemble_restricted(&self.lattice, &gauge, &mask)?, mask))
    }
}

/// Bounded perturbation of a region: union with open balls of `radius`
/// centered at `(n·spacing, center_y)` for every integer `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Decoration {
    pub radius: f64,
    pub center_y: f64,
    pub spacing: f64,
}

impl Decoration {
    pub fn balls(radius: f64, center_y: f64) -> Self {
        Decoration { radius, center_y, spacing: 1.0 }
    }
}

/// Union of `mask` with the balls of `decoration`; boundary distances are recomputed.
pub fn perturb_boundary(mask: &RegionMask, decoration: Decoration) -> Result<RegionMask> {
    let w = *mask.window();
    let h = mask.h();
    let (y_lo, y_hi) = (w.origin.1 as f64 * h, (w.origin.1 + w.ny as i64 - 1) as f64 * h);
    if !(y_lo <= decoration.center_y && decoration.center_y <= y_hi) {
        return Err(Error::DecorationOutsideWindow(format!(
            "ball centers at y = {} lie outside [{y_lo}, {y_hi}]",
            decoration.center_y
        )));
    }
    if !(decoration.radius >= 0.0) || !(decoration.spacing > 0.0) {
        return Err(Error::InvalidArgument("decoration needs radius ≥ 0 and spacing > 0".into()));
    }
    let r2 = decoration.radius * decoration.radius;
    let balls: Vec<bool> = (0..w.len())
        .map(|v| {
            let (i, j) = w.plane(v);
            let (x, y) = (i as f64 * h, j as f64 * h);
            let dx = x - (x / decoration.spacing).round() * decoration.spacing;
            let dy = y - decoration.center_y;
            dx * dx + dy * dy < r2
        })
        .collect();
    let descriptor = match mask.descriptor() {
        ShapeDescriptor::HalfPlane { c } if decoration.spacing == 1.0 => {
            ShapeDescriptor::Decorated { c: *c, radius: decoration.radius, center_y: decoration.center_y }
        }
        _ => {
            let merged: Vec<bool> = mask.members().iter().zip(&balls).map(|(a, b)| *a || *b).collect();
            ShapeDescriptor::Sites { sites: (0..w.len()).filter(|&v| merged[v]).map(|v| w.plane(v)).collect() }
        }
    };
    Ok(mask.union(&balls, descriptor))
}

/// First spectral gap of the bulk operator on the torus, certified from a
/// windowed solve over the lowest two Landau levels.
pub fn bulk_gap(lattice: &MagneticLattice, opts: &SolverOptions) -> Result<SpectralInterval> {
    let lat = lattice.with_geometry(Geometry::Torus);
    let h = assemble_bulk(&lat, &build_gauge(&lat, GaugeKind::Landau)?)?;
    let (glo, ghi) = h.gershgorin();
    let k = lat.k() as f64;
    if k == 0.0 {
        return Err(Error::NoUniformGap);
    }
    let upper = 8.0 * std::f64::consts::PI * k * 1.5;
    let per_level = 2 * lat.k() as usize * lat.cells();
    let mode = if h.dim() <= opts.dense_cap.min(1500) {
        EigenMode::Full
    } else {
        EigenMode::Window { lower: glo, upper: upper.min(ghi), max_pairs: 4 * per_level }
    };
    let report = eigensolve(&h, mode, opts)?;
    report.gaps.first().copied().ok_or(Error::NoUniformGap)
}
